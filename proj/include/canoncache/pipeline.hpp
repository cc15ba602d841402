#pragma once

// Stage functions shared by the CLI subcommands and the end-to-end pipeline.
// Config files are YAML; relative paths inside them resolve against the
// directory holding the file.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
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

namespace canoncache::pipeline {

using nlohmann::json;

/// An error raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// ---- individual stages ----

std::vector<json> fingerprint_all(std::span<const Query> dataset, const fingerprint::Lexicons& lexicons);

/// Queries without an embedding raise MissingEmbedding.
std::vector<PredictionRecord> classify_all(std::span<const Query> dataset,
                                           const proto::EmbeddingTable& table,
                                           const proto::PrototypeModel& model);

/// Keys from the prediction log against the dataset's intents.
metrics::KeyQualityReport key_quality(std::span<const Query> truth,
                                      std::span<const PredictionRecord> predictions, double beta);

risk::CalibrationSet calibration_set(std::span<const Query> truth,
                                     std::span<const PredictionRecord> predictions);

struct TemperatureReport {
  proto::CalibrationReport before;
  proto::CalibrationReport after;  // after.fitted_temperature holds T
  double nll_before = 0.0;
  double nll_after = 0.0;
};

/// ECE of the log as is and after a temperature fitted on log-scores. Empty
/// when a record has no class scores or its true key is not among them.
std::optional<TemperatureReport> temperature_report(std::span<const Query> truth,
                                                    std::span<const PredictionRecord> predictions);

json certificate_json(const risk::ThresholdCertificate& cert, std::span<const Query> truth,
                      std::span<const PredictionRecord> predictions);

json cost_json(const cost::CostConfig& cfg, long requests_per_day);
std::string sensitivity_csv(const cost::CostConfig& cfg, std::span<const double> local_shares,
                            long requests_per_day);

// ---- cascade simulation ----

enum class ResolverKind { none, oracle, stub, oracle_or_stub };

struct SimulationConfig {
  std::filesystem::path lexicons;
  std::filesystem::path model;        // tier-2 prototype model
  std::filesystem::path tier1_model;  // optional
  std::filesystem::path embeddings;
  std::filesystem::path predictions;  // optional tier-2 replay log, used instead of the model
  std::filesystem::path plans;        // optional plan library
  std::filesystem::path retraining_pool;
  cascade::EngineConfig engine;
  ResolverKind cheap = ResolverKind::oracle;
  ResolverKind deep = ResolverKind::oracle_or_stub;
  int latency_ms = 0;
  bool warm = false;

  /// Reads YAML; throws Validation on unknown resolver kinds or bad tiers.
  static SimulationConfig load(const std::filesystem::path& file);
};

struct BuiltEngine {
  std::unique_ptr<cascade::Engine> engine;
  std::shared_ptr<cascade::RetrainingPool> pool;
};

/// Wires classifiers, resolvers and the retraining pool. `truncate_pool`
/// starts the pool file empty, which keeps reruns byte-identical.
BuiltEngine build_engine(const SimulationConfig& cfg, bool truncate_pool);

json simulation_json(const cascade::SimulationResult& result);

// ---- end to end ----

struct PipelineConfig {
  std::filesystem::path dataset;
  SimulationConfig simulation;
  double beta = 1.0;
  std::size_t grid_size = 100;
  double grid_lo = 0.0;
  double grid_hi = 0.99;
  risk::BoundSpec bound;
  std::filesystem::path cost_config;  // optional; defaults otherwise
  long requests_per_day = 50;
  std::uint64_t seed = 42;

  static PipelineConfig load(const std::filesystem::path& file);
};

struct ArtifactEntry {
  std::string stage;
  std::string path;  // relative to the output directory
  std::string fnv1a64;
};

struct PipelineResult {
  std::vector<ArtifactEntry> artifacts;
  risk::ThresholdCertificate certificate;
  std::filesystem::path manifest;
};

/// fingerprint, classify, simulate, metrics, sweep, calibrate, cost; then
/// manifest.json listing one entry per stage output.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace canoncache::pipeline
