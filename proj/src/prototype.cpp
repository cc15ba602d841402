#include "canoncache/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace canoncache::proto {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

Vector normalized(std::span<const double> v) {
  const double n = norm2(v);
  if (n == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

// Numerically stable softmax of `logits / temperature`.
std::vector<double> softmax(std::span<const double> logits, double temperature) {
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) top = std::max(top, z / temperature);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / temperature - top);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::Validation, "embedding dim must be positive");
}

void EmbeddingTable::insert(std::string id, Vector vec) {
  if (vec.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "embedding '" + id + "' has length " +
                                                  std::to_string(vec.size()) + ", expected " +
                                                  std::to_string(dim_));
  }
  if (!std::all_of(vec.begin(), vec.end(), [](double x) { return std::isfinite(x); })) {
    throw Error(ErrorCode::Validation, "embedding '" + id + "' has non-finite components");
  }
  vectors_.insert_or_assign(std::move(id), std::move(vec));
}

const Vector& EmbeddingTable::at(const std::string& id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw Error(ErrorCode::MissingEmbedding, "no embedding for '" + id + "'");
  return it->second;
}

PrototypeModel::PrototypeModel(std::size_t dim,
                               std::map<CacheKey, Vector, CanonicalOrder> centroids,
                               double temperature)
    : dim_(dim), temperature_(temperature) {
  if (centroids.size() < 2) throw Error(ErrorCode::SingleClass, "model needs at least two keys");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::Validation, "temperature must be positive");
  }
  for (auto& [key, c] : centroids) {
    if (c.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "centroid for '" + canonical_key_string(key) + "' has the wrong length");
    }
    // already-unit vectors are kept bit-for-bit so saved models reload identically
    if (std::abs(norm2(c) - 1.0) <= 1e-12) {
      centroids_.emplace(key, std::move(c));
    } else {
      centroids_.emplace(key, normalized(c));
    }
  }
}

PrototypeModel PrototypeModel::with_temperature(double t) const {
  return PrototypeModel(dim_, centroids_, t);
}

PrototypeModel fit_centroids(std::span<const std::pair<std::string, CacheKey>> examples,
                             const EmbeddingTable& table) {
  std::map<CacheKey, Vector, CanonicalOrder> sums;
  for (const auto& [id, key] : examples) {
    const Vector unit = normalized(table.at(id));
    auto [it, fresh] = sums.try_emplace(key, Vector(table.dim(), 0.0));
    for (std::size_t i = 0; i < unit.size(); ++i) it->second[i] += unit[i];
  }
  if (sums.size() < 2) throw Error(ErrorCode::SingleClass, "fit_centroids needs >= 2 distinct keys");
  // mean then L2-normalize; the division by count cancels in the normalization
  return PrototypeModel(table.dim(), std::move(sums), 1.0);
}

std::vector<std::pair<CacheKey, double>> cosine_scores(std::span<const double> vec,
                                                       const PrototypeModel& model) {
  if (vec.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query vector length " + std::to_string(vec.size()) +
                                                  " does not match model dim " +
                                                  std::to_string(model.dim()));
  }
  const double n = norm2(vec);
  if (n == 0.0) throw Error(ErrorCode::ZeroVector, "query vector is zero");
  std::vector<std::pair<CacheKey, double>> out;
  out.reserve(model.centroids().size());
  for (const auto& [key, c] : model.centroids()) {
    const double dot = std::inner_product(vec.begin(), vec.end(), c.begin(), 0.0);
    out.emplace_back(key, dot / n);
  }
  return out;
}

PredictionRecord classify(std::span<const double> vec, const PrototypeModel& model,
                          std::string query_id) {
  const auto cos = cosine_scores(vec, model);
  std::vector<double> logits(cos.size());
  std::transform(cos.begin(), cos.end(), logits.begin(), [](const auto& p) { return p.second; });
  const auto probs = softmax(logits, model.temperature());

  // centroids iterate in canonical order, so the first max is the tie-break winner
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  ClassScores scores;
  for (std::size_t i = 0; i < cos.size(); ++i) scores.emplace(cos[i].first, probs[i]);
  return PredictionRecord{std::move(query_id), cos[best].first, probs[best], std::move(scores)};
}

std::vector<PredictionRecord> classify_batch(std::span<const std::string> ids,
                                             const EmbeddingTable& table,
                                             const PrototypeModel& model) {
  // resolve lookups up front so a missing id throws outside the parallel region
  std::vector<const Vector*> vecs;
  vecs.reserve(ids.size());
  for (const auto& id : ids) vecs.push_back(&table.at(id));

  std::vector<std::optional<PredictionRecord>> slots(ids.size());
  std::vector<std::string> errors(ids.size());
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      slots[i] = classify(*vecs[i], model, ids[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  std::vector<PredictionRecord> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      // rerun serially to rethrow with the original error code
      classify(*vecs[i], model, ids[i]);
      throw Error(ErrorCode::Validation, errors[i]);
    }
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

namespace serial {
std::vector<PredictionRecord> classify_batch(std::span<const std::string> ids,
                                             const EmbeddingTable& table,
                                             const PrototypeModel& model) {
  std::vector<PredictionRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(classify(table.at(id), model, id));
  return out;
}
}  // namespace serial

CalibrationReport ece(std::span<const ScoredOutcome> predictions, int bins) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "ece needs at least one prediction");
  if (bins < 1) throw Error(ErrorCode::InvalidParams, "ece needs at least one bin");

  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::size_t> hits(bins, 0);
  CalibrationReport report;
  report.bins.assign(bins, {});
  for (const auto& p : predictions) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      throw Error(ErrorCode::Validation, "confidence out of [0,1]");
    }
    const int b = std::min(static_cast<int>(p.confidence * bins), bins - 1);
    conf_sum[b] += p.confidence;
    hits[b] += p.correct ? 1 : 0;
    report.bins[b].count += 1;
  }
  const double n = static_cast<double>(predictions.size());
  for (int b = 0; b < bins; ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const double cnt = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / cnt;
    bin.accuracy = static_cast<double>(hits[b]) / cnt;
    report.ece += (cnt / n) * std::abs(bin.accuracy - bin.mean_confidence);
  }
  return report;
}

double temperature_nll(std::span<const RawScores> data, double temperature) {
  double total = 0.0;
  for (const auto& ex : data) {
    double top = -std::numeric_limits<double>::infinity();
    double truth = std::numeric_limits<double>::quiet_NaN();
    for (const auto& [key, s] : ex.scores) {
      top = std::max(top, s / temperature);
      if (key == ex.truth) truth = s / temperature;
    }
    if (std::isnan(truth)) {
      throw Error(ErrorCode::Validation, "true key missing from score map");
    }
    double sum = 0.0;
    for (const auto& [key, s] : ex.scores) sum += std::exp(s / temperature - top);
    total += (top + std::log(sum)) - truth;
  }
  return total / static_cast<double>(data.size());
}

double fit_temperature(std::span<const RawScores> data) {
  if (data.size() < 2) throw Error(ErrorCode::EmptyInput, "fit_temperature needs n >= 2");

  const auto objective = [&](double log_t) { return temperature_nll(data, std::exp(log_t)); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(0.05);
  double hi = std::log(50.0);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int iter = 0; iter < 200; ++iter) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  const double best_log_t = f1 <= f2 ? x1 : x2;
  const double t_star = std::exp(best_log_t);
  if (temperature_nll(data, t_star) <= temperature_nll(data, 1.0)) return t_star;
  return 1.0;
}

ScoredOutcome rescore(const RawScores& example, double temperature) {
  std::vector<double> logits;
  logits.reserve(example.scores.size());
  for (const auto& [key, s] : example.scores) logits.push_back(s);
  const auto probs = softmax(logits, temperature);
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best] ||
        (probs[i] == probs[best] && example.scores[i].first < example.scores[best].first)) {
      best = i;
    }
  }
  return {probs[best], example.scores[best].first == example.truth};
}

}  // namespace canoncache::proto
