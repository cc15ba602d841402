#pragma once

// File formats. All JSONL readers report the offending line number.
//
//   dataset        {"id","text","language","intent"?}
//   prediction log {"id","key","confidence","scores"?}
//   embeddings     first line {"dim":N}, then {"id","vector":[...]}
//   plan library   {"key","steps":[...]}
//   fingerprints   {"id","hash","template","params"}   (hash: 16 lowercase hex digits)

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "canoncache/cascade.hpp"
#include "canoncache/core.hpp"
#include "canoncache/cost.hpp"
#include "canoncache/fingerprint.hpp"
#include "canoncache/metrics.hpp"
#include "canoncache/prototype.hpp"
#include "canoncache/risk.hpp"

namespace canoncache::io {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::string& contents);
void write_json(const std::filesystem::path& path, const json& value);
json read_json(const std::filesystem::path& path);

/// FNV-1a 64 of the file's bytes, as 16 hex digits.
std::string content_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

std::vector<Query> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, std::span<const Query> queries);
json to_json(const Query& q);
Query query_from_json(const json& j);

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
json to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const json& j);

proto::EmbeddingTable read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const proto::EmbeddingTable& table);

json to_json(const proto::PrototypeModel& model);
proto::PrototypeModel model_from_json(const json& j);
proto::PrototypeModel read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const proto::PrototypeModel& model);

cascade::PlanLibrary read_plan_library(const std::filesystem::path& path);

json to_json(const fingerprint::FingerprintResult& fp, const std::string& id);
json to_json(const cascade::Resolution& r);
json to_json(const cascade::TrafficStats& s);
json to_json(const metrics::KeyQualityReport& r);
json to_json(const risk::ThresholdCertificate& c);
json to_json(const proto::CalibrationReport& r);

/// CSV with header `tau,coverage,safety,risk`; undefined safety is an empty field.
std::string curve_csv(std::span<const risk::CurvePoint> curve);

/// Joins predictions to labeled queries by id. Throws Validation on unknown
/// or unlabeled ids.
struct LabeledPrediction {
  const Query* query;
  const PredictionRecord* prediction;
  bool correct;
};
std::vector<LabeledPrediction> join_labels(std::span<const Query> truth,
                                           std::span<const PredictionRecord> predictions);

/// `lo:hi:step` inclusive of hi (within half a step).
std::vector<double> parse_range(const std::string& spec);

}  // namespace canoncache::io
