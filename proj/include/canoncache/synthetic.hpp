#pragma once

// Test-fixture generator: labeled queries from per-class templates, clustered
// unit-vector embeddings, and a prediction log with a chosen accuracy and
// confidence model. Also a hashed bag-of-words embedder for small corpora.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "canoncache/core.hpp"
#include "canoncache/fingerprint.hpp"
#include "canoncache/prototype.hpp"

namespace canoncache::synthetic {

enum class ConfidenceModel { calibrated, overconfident };

struct ClassTemplates {
  CacheKey key;
  // markers: {who} {when} {how_much} {ticker}
  std::vector<std::string> templates;
};

struct SyntheticSpec {
  std::size_t n_classes = 8;
  std::size_t n_per_class = 100;
  std::vector<ClassTemplates> classes;  // empty: built-in templates
  double accuracy = 0.9;
  ConfidenceModel confidence_model = ConfidenceModel::calibrated;
  double scale = 1.0;           // sharpening when overconfident, >= 1
  double concentration = 4.0;   // Beta concentration of P(correct)
  std::size_t dim = 32;
  double separation = 3.0;      // center weight against unit-scale noise
  std::size_t fit_per_class = 8;
  std::uint64_t seed = 42;

  /// Throws Error{InvalidSpec}.
  void validate() const;
  /// YAML with the field names above; absent keys keep defaults.
  static SyntheticSpec load(const std::filesystem::path& file);
};

/// The eight built-in classes, or generic ones past eight.
std::vector<ClassTemplates> default_classes(std::size_t n_classes);

struct SyntheticCorpus {
  std::vector<Query> dataset;
  proto::EmbeddingTable embeddings{1};
  std::vector<PredictionRecord> predictions;
  proto::PrototypeModel model;  // fit on the first fit_per_class items of each class
};

/// Pure function of the spec (the seed included). Entity values come from
/// `lexicons` when non-empty, else from built-in pools.
SyntheticCorpus generate(const SyntheticSpec& spec, const fingerprint::Lexicons& lexicons = {});

/// Signed feature hashing over the template tokens of a query (entities
/// masked, function words dropped) and their bigrams, L2-normalized.
proto::Vector embed_text(const Query& query, const fingerprint::Lexicons& lexicons, std::size_t dim);

proto::EmbeddingTable embed_dataset(std::span<const Query> dataset,
                                    const fingerprint::Lexicons& lexicons, std::size_t dim);

}  // namespace canoncache::synthetic
