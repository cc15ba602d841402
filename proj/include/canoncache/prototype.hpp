#pragma once

// Nearest-prototype classifier over precomputed sentence embeddings, with
// temperature-scaled cosine-softmax confidences and calibration diagnostics.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "canoncache/core.hpp"

namespace canoncache::proto {

using Vector = std::vector<double>;

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  /// Rejects wrong lengths (DimensionMismatch) and non-finite components (Validation).
  void insert(std::string id, Vector vec);
  /// Throws Error{MissingEmbedding} for unknown ids.
  const Vector& at(const std::string& id) const;
  bool contains(const std::string& id) const { return vectors_.contains(id); }
  std::size_t size() const noexcept { return vectors_.size(); }
  const std::map<std::string, Vector>& vectors() const noexcept { return vectors_; }

 private:
  std::size_t dim_;
  std::map<std::string, Vector> vectors_;
};

class PrototypeModel {
 public:
  /// Centroids are re-normalized; needs >= 2 keys and temperature > 0.
  PrototypeModel(std::size_t dim, std::map<CacheKey, Vector, CanonicalOrder> centroids,
                 double temperature = 1.0);

  std::size_t dim() const noexcept { return dim_; }
  double temperature() const noexcept { return temperature_; }
  const std::map<CacheKey, Vector, CanonicalOrder>& centroids() const noexcept {
    return centroids_;
  }
  PrototypeModel with_temperature(double t) const;

 private:
  std::size_t dim_;
  std::map<CacheKey, Vector, CanonicalOrder> centroids_;
  double temperature_;
};

PrototypeModel fit_centroids(std::span<const std::pair<std::string, CacheKey>> examples,
                             const EmbeddingTable& table);

/// Cosine similarity of `vec` against each centroid, in canonical key order.
std::vector<std::pair<CacheKey, double>> cosine_scores(std::span<const double> vec,
                                                       const PrototypeModel& model);

/// softmax(cos / T); ties go to the lexicographically smallest key.
PredictionRecord classify(std::span<const double> vec, const PrototypeModel& model,
                          std::string query_id = {});

/// Batch classification over an id list. OpenMP over queries.
std::vector<PredictionRecord> classify_batch(std::span<const std::string> ids,
                                             const EmbeddingTable& table,
                                             const PrototypeModel& model);

namespace serial {
std::vector<PredictionRecord> classify_batch(std::span<const std::string> ids,
                                             const EmbeddingTable& table,
                                             const PrototypeModel& model);
}  // namespace serial

struct CalibrationBin {
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  double ece = 0.0;
  std::vector<CalibrationBin> bins;
  double fitted_temperature = 1.0;
};

struct ScoredOutcome {
  double confidence;
  bool correct;
};

/// Equal-width binned expected calibration error; confidence 1.0 lands in the top bin.
CalibrationReport ece(std::span<const ScoredOutcome> predictions, int bins = 15);

/// Raw (pre-softmax) per-key scores of one calibration example and its true key.
struct RawScores {
  std::vector<std::pair<CacheKey, double>> scores;
  CacheKey truth;
};

/// Mean negative log-likelihood of softmax(scores / T) at the true key.
double temperature_nll(std::span<const RawScores> data, double temperature);

/// Golden-section search on log T in [ln 0.05, ln 50]; never worse than T = 1.
double fit_temperature(std::span<const RawScores> data);

/// Confidence and argmax of softmax(scores / T) for one example.
ScoredOutcome rescore(const RawScores& example, double temperature);

}  // namespace canoncache::proto
