#pragma once

// Five-tier router. Tier 0 looks the query's template hash up in the
// fingerprint index; tiers 1 and 2 are confidence-thresholded classifiers
// that resolve only when the predicted key already has a cached plan; tier 3
// is a cheap external resolver whose answers are cached and queued for
// retraining; tier 4 is the deep resolver and always answers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "canoncache/core.hpp"
#include "canoncache/fingerprint.hpp"
#include "canoncache/prototype.hpp"

namespace canoncache::cascade {

inline constexpr int kTierCount = 5;

struct TierConfig {
  int tier_id = 0;
  double threshold = 0.0;  // used by tiers 1 and 2 only
  bool enabled = true;
};

struct PlanTemplate {
  CacheKey key;
  std::vector<std::string> steps;  // may contain {who}, {when}, {how_much}

  /// Throws Error{Validation} on a `{name}` marker that is not a parameter slot.
  void validate() const;
};

struct ConcretePlan {
  std::vector<std::string> steps;
  std::vector<std::string> missing;  // slot names that had no value

  bool complete() const noexcept { return missing.empty(); }
};

ConcretePlan inject_params(const PlanTemplate& plan, const ParamSet& params);

struct CacheEntry {
  CacheKey key;
  PlanTemplate plan;
  std::uint64_t hit_count = 0;
  std::uint64_t created_seq = 0;
};

/// Plan cache plus the template-hash index used by tier 0. Reads take a
/// shared lock; inserts go through a single exclusive commit.
class PlanCache {
 public:
  /// Inserts unless the key is already cached; returns true on insert.
  bool insert(PlanTemplate plan);
  std::optional<PlanTemplate> plan_for(const CacheKey& key) const;
  bool contains(const CacheKey& key) const;
  void record_hit(const CacheKey& key);

  /// First key registered for a template hash wins.
  void index_fingerprint(std::uint64_t hash, const CacheKey& key);
  std::optional<CacheKey> key_for_fingerprint(std::uint64_t hash) const;

  std::vector<CacheEntry> entries() const;
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<CacheKey, CacheEntry, CanonicalOrder> entries_;
  std::unordered_map<std::uint64_t, CacheKey> fingerprint_index_;
  std::uint64_t next_seq_ = 0;
};

/// Tier-3 learning log: JSONL `{"text","key"}`, one atomic append per record.
class RetrainingPool {
 public:
  explicit RetrainingPool(std::filesystem::path path, bool truncate = false);

  void append(const std::string& text, const CacheKey& key);
  std::size_t appended() const noexcept { return appended_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::size_t appended_ = 0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  /// Empty when this classifier cannot score the query (the tier abstains).
  virtual std::optional<PredictionRecord> predict(const Query& query) const = 0;
};

/// Nearest-prototype model over an embedding table keyed by query id.
class PrototypeClassifier : public Classifier {
 public:
  PrototypeClassifier(proto::PrototypeModel model, std::shared_ptr<const proto::EmbeddingTable> table);
  std::optional<PredictionRecord> predict(const Query& query) const override;

 private:
  proto::PrototypeModel model_;
  std::shared_ptr<const proto::EmbeddingTable> table_;
};

/// Replays a prediction log keyed by query id.
class ReplayClassifier : public Classifier {
 public:
  explicit ReplayClassifier(std::vector<PredictionRecord> records);
  std::optional<PredictionRecord> predict(const Query& query) const override;

 private:
  std::unordered_map<std::string, PredictionRecord> by_id_;
};

struct ResolverAnswer {
  CacheKey key;
  PlanTemplate plan;
};

/// Synchronous resolver hook for tiers 3 and 4; empty means failure.
using Resolver = std::function<std::optional<ResolverAnswer>(const Query&)>;

using PlanLibrary = std::map<CacheKey, PlanTemplate, CanonicalOrder>;

/// `action(target)` with no parameter slots.
PlanTemplate default_plan(const CacheKey& key);

/// Answers with the query's labeled intent and its library plan (or the default plan).
Resolver oracle_resolver(std::shared_ptr<const PlanLibrary> library);

/// Sleeps `latency_ms`, then answers with a per-template stub key.
Resolver stub_resolver(int latency_ms, std::shared_ptr<const fingerprint::Lexicons> lexicons);

struct Resolution {
  std::string query_id;
  int resolved_tier = 0;
  std::optional<CacheKey> key;
  std::optional<ConcretePlan> plan;
  bool was_cache_hit = false;
  std::optional<double> confidence;  // classifier confidence when tier 1/2 resolved
};

struct EngineConfig {
  std::array<TierConfig, kTierCount> tiers{{{0, 0.0, true},
                                            {1, 0.85, false},
                                            {2, 0.25, true},
                                            {3, 0.0, true},
                                            {4, 0.0, true}}};

  void validate() const;
};

struct Precomputed {
  std::optional<PredictionRecord> tier1;
  std::optional<PredictionRecord> tier2;
};

class Engine {
 public:
  Engine(fingerprint::Lexicons lexicons, EngineConfig config);

  void set_classifier(int tier, std::shared_ptr<const Classifier> classifier);
  void set_cheap_resolver(Resolver r) { cheap_ = std::move(r); }
  void set_deep_resolver(Resolver r) { deep_ = std::move(r); }
  void set_retraining_pool(std::shared_ptr<RetrainingPool> pool) { pool_ = std::move(pool); }

  /// Pre-populates the plan cache (does not touch the fingerprint index).
  void warm(const PlanLibrary& library);

  Resolution route(const Query& query);
  /// Routes with classifier outputs computed ahead of time (see precompute()).
  Resolution route(const Query& query, const Precomputed& pre);

  /// Classifier outputs for a batch, in input order. OpenMP over queries.
  std::vector<Precomputed> precompute(std::span<const Query> queries) const;

  const EngineConfig& config() const noexcept { return config_; }
  PlanCache& cache() noexcept { return cache_; }
  const PlanCache& cache() const noexcept { return cache_; }

 private:
  Precomputed predict_one(const Query& query) const;

  fingerprint::Lexicons lexicons_;
  EngineConfig config_;
  std::array<std::shared_ptr<const Classifier>, 3> classifiers_{};  // index = tier
  Resolver cheap_;
  Resolver deep_;
  std::shared_ptr<RetrainingPool> pool_;
  PlanCache cache_;
};

struct TrafficStats {
  std::array<std::uint64_t, kTierCount> per_tier{};
  std::uint64_t total = 0;
  std::uint64_t covered = 0;          // tiers 0-2
  std::uint64_t labeled_covered = 0;  // covered and labeled
  std::uint64_t correct_covered = 0;

  void record(const Resolution& r, const Query& q);
  TrafficStats& operator+=(const TrafficStats& other);

  double coverage() const noexcept;
  std::optional<double> safety() const noexcept;
  std::optional<double> unsafe_rate() const noexcept;
};

struct SimulationResult {
  TrafficStats stats;
  std::vector<Resolution> resolutions;
};

/// Streams the dataset through the engine in order.
SimulationResult simulate(std::span<const Query> dataset, Engine& engine);

}  // namespace canoncache::cascade
