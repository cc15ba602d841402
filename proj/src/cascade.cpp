#include "canoncache/cascade.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <regex>
#include <thread>

#include <json.hpp>

namespace canoncache::cascade {

namespace {

const std::regex& marker_re() {
  static const std::regex re(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  return re;
}

}  // namespace

void PlanTemplate::validate() const {
  for (const auto& step : steps) {
    for (auto it = std::sregex_iterator(step.begin(), step.end(), marker_re());
         it != std::sregex_iterator(); ++it) {
      if (!parse_slot((*it)[1].str())) {
        throw Error(ErrorCode::Validation, "unknown slot marker '" + (*it)[0].str() + "' in plan for " +
                                               canonical_key_string(key));
      }
    }
  }
}

ConcretePlan inject_params(const PlanTemplate& plan, const ParamSet& params) {
  ConcretePlan out;
  for (const auto& step : plan.steps) {
    std::string filled;
    std::size_t cursor = 0;
    for (auto it = std::sregex_iterator(step.begin(), step.end(), marker_re());
         it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      filled.append(step, cursor, static_cast<std::size_t>(m.position(0)) - cursor);
      const std::string name = m[1].str();
      const auto slot = parse_slot(name);
      std::optional<std::string> value = slot ? params.get(*slot) : std::nullopt;
      if (value) {
        filled += *value;
      } else {
        filled += "<missing:" + name + ">";
        if (std::find(out.missing.begin(), out.missing.end(), name) == out.missing.end()) {
          out.missing.push_back(name);
        }
      }
      cursor = static_cast<std::size_t>(m.position(0) + m.length(0));
    }
    filled.append(step, cursor);
    out.steps.push_back(std::move(filled));
  }
  return out;
}

bool PlanCache::insert(PlanTemplate plan) {
  plan.validate();
  std::unique_lock lock(mutex_);
  const CacheKey key = plan.key;
  if (entries_.contains(key)) return false;
  entries_.emplace(key, CacheEntry{key, std::move(plan), 0, next_seq_++});
  return true;
}

std::optional<PlanTemplate> PlanCache::plan_for(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second.plan;
  return std::nullopt;
}

bool PlanCache::contains(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  return entries_.contains(key);
}

void PlanCache::record_hit(const CacheKey& key) {
  std::unique_lock lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) ++it->second.hit_count;
}

void PlanCache::index_fingerprint(std::uint64_t hash, const CacheKey& key) {
  std::unique_lock lock(mutex_);
  fingerprint_index_.try_emplace(hash, key);
}

std::optional<CacheKey> PlanCache::key_for_fingerprint(std::uint64_t hash) const {
  std::shared_lock lock(mutex_);
  if (auto it = fingerprint_index_.find(hash); it != fingerprint_index_.end()) return it->second;
  return std::nullopt;
}

std::vector<CacheEntry> PlanCache::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<CacheEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.push_back(entry);
  return out;
}

std::size_t PlanCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

RetrainingPool::RetrainingPool(std::filesystem::path path, bool truncate) : path_(std::move(path)) {
  std::FILE* f = std::fopen(path_.c_str(), truncate ? "wb" : "ab");
  if (!f) throw Error(ErrorCode::Io, "cannot open retraining pool " + path_.string());
  std::fclose(f);
}

void RetrainingPool::append(const std::string& text, const CacheKey& key) {
  const std::string line =
      nlohmann::json{{"text", text}, {"key", canonical_key_string(key)}}.dump() + "\n";
  std::lock_guard lock(mutex_);
  // O_APPEND plus a single write keeps each record whole
  std::FILE* f = std::fopen(path_.c_str(), "ab");
  if (!f) throw Error(ErrorCode::Io, "cannot append to retraining pool " + path_.string());
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
  const bool closed = std::fclose(f) == 0;
  if (!ok || !closed) throw Error(ErrorCode::Io, "short write to retraining pool " + path_.string());
  ++appended_;
}

PrototypeClassifier::PrototypeClassifier(proto::PrototypeModel model,
                                         std::shared_ptr<const proto::EmbeddingTable> table)
    : model_(std::move(model)), table_(std::move(table)) {
  if (!table_) throw Error(ErrorCode::Validation, "prototype classifier needs an embedding table");
  if (table_->dim() != model_.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "embedding table and model dims differ");
  }
}

std::optional<PredictionRecord> PrototypeClassifier::predict(const Query& query) const {
  if (!table_->contains(query.id)) return std::nullopt;
  return proto::classify(table_->at(query.id), model_, query.id);
}

ReplayClassifier::ReplayClassifier(std::vector<PredictionRecord> records) {
  for (auto& r : records) {
    const std::string id = r.query_id;
    by_id_.insert_or_assign(id, std::move(r));
  }
}

std::optional<PredictionRecord> ReplayClassifier::predict(const Query& query) const {
  if (auto it = by_id_.find(query.id); it != by_id_.end()) return it->second;
  return std::nullopt;
}

PlanTemplate default_plan(const CacheKey& key) {
  return {key, {key.action() + "(" + key.target() + ")"}};
}

Resolver oracle_resolver(std::shared_ptr<const PlanLibrary> library) {
  return [library = std::move(library)](const Query& q) -> std::optional<ResolverAnswer> {
    if (!q.true_intent) return std::nullopt;
    const auto key = q.true_intent->as_key();
    if (!key) return std::nullopt;
    if (library) {
      if (auto it = library->find(*key); it != library->end()) return ResolverAnswer{*key, it->second};
    }
    return ResolverAnswer{*key, default_plan(*key)};
  };
}

Resolver stub_resolver(int latency_ms, std::shared_ptr<const fingerprint::Lexicons> lexicons) {
  return [latency_ms, lexicons = std::move(lexicons)](const Query& q) -> std::optional<ResolverAnswer> {
    if (latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms));
    const auto fp = fingerprint::fingerprint(q, *lexicons);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fp.fingerprint.hash));
    CacheKey key("stub", std::string("t_") + hex);
    return ResolverAnswer{key, PlanTemplate{key, {"stub_plan(" + fp.fingerprint.template_text + ")"}}};
  };
}

void EngineConfig::validate() const {
  for (int i = 0; i < kTierCount; ++i) {
    const auto& t = tiers[i];
    if (t.tier_id != i) throw Error(ErrorCode::Validation, "tier ids must be 0..4 in order");
    // thresholds above 1 are allowed and mean "never accept"
    if (!(t.threshold >= 0.0) || std::isnan(t.threshold)) {
      throw Error(ErrorCode::Validation, "tier threshold must be >= 0");
    }
  }
}

Engine::Engine(fingerprint::Lexicons lexicons, EngineConfig config)
    : lexicons_(std::move(lexicons)), config_(config) {
  config_.validate();
}

void Engine::set_classifier(int tier, std::shared_ptr<const Classifier> classifier) {
  if (tier != 1 && tier != 2) throw Error(ErrorCode::Validation, "classifiers live on tiers 1 and 2");
  classifiers_[tier] = std::move(classifier);
}

void Engine::warm(const PlanLibrary& library) {
  for (const auto& [key, plan] : library) cache_.insert(plan);
}

Precomputed Engine::predict_one(const Query& query) const {
  Precomputed pre;
  if (config_.tiers[1].enabled && classifiers_[1]) pre.tier1 = classifiers_[1]->predict(query);
  if (config_.tiers[2].enabled && classifiers_[2]) pre.tier2 = classifiers_[2]->predict(query);
  return pre;
}

std::vector<Precomputed> Engine::precompute(std::span<const Query> queries) const {
  std::vector<Precomputed> out(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = predict_one(queries[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Resolution Engine::route(const Query& query) { return route(query, predict_one(query)); }

Resolution Engine::route(const Query& query, const Precomputed& pre) {
  query.validate();
  const auto fp = fingerprint::fingerprint(query, lexicons_);
  const std::uint64_t hash = fp.fingerprint.hash;

  Resolution res;
  res.query_id = query.id;

  if (config_.tiers[0].enabled) {
    if (auto key = cache_.key_for_fingerprint(hash)) {
      if (auto plan = cache_.plan_for(*key)) {
        cache_.record_hit(*key);
        res.resolved_tier = 0;
        res.key = *key;
        res.plan = inject_params(*plan, fp.params);
        res.was_cache_hit = true;
        return res;
      }
    }
  }

  for (int tier : {1, 2}) {
    if (!config_.tiers[tier].enabled || !classifiers_[tier]) continue;
    const auto& pred = tier == 1 ? pre.tier1 : pre.tier2;
    if (!pred || pred->confidence < config_.tiers[tier].threshold) continue;
    // a confident key without a cached plan is not a hit
    auto plan = cache_.plan_for(pred->predicted_key);
    if (!plan) continue;
    cache_.record_hit(pred->predicted_key);
    cache_.index_fingerprint(hash, pred->predicted_key);
    res.resolved_tier = tier;
    res.key = pred->predicted_key;
    res.plan = inject_params(*plan, fp.params);
    res.was_cache_hit = true;
    res.confidence = pred->confidence;
    return res;
  }

  if (config_.tiers[3].enabled && cheap_) {
    if (auto answer = cheap_(query)) {
      PlanTemplate plan = std::move(answer->plan);
      plan.key = answer->key;
      cache_.insert(plan);
      cache_.index_fingerprint(hash, answer->key);
      if (pool_) pool_->append(query.text, answer->key);
      res.resolved_tier = 3;
      res.key = answer->key;
      res.plan = inject_params(plan, fp.params);
      return res;
    }
  }

  if (config_.tiers[4].enabled && deep_) {
    if (auto answer = deep_(query)) {
      res.resolved_tier = 4;
      res.key = answer->key;
      res.plan = inject_params(answer->plan, fp.params);
      return res;
    }
  }

  throw Error(ErrorCode::ResolverUnavailable,
              "no tier resolved query '" + query.id + "' and no resolver is available");
}

void TrafficStats::record(const Resolution& r, const Query& q) {
  ++total;
  ++per_tier.at(static_cast<std::size_t>(r.resolved_tier));
  if (r.resolved_tier <= 2) {
    ++covered;
    if (q.true_intent) {
      ++labeled_covered;
      if (r.key && q.true_intent->matches(*r.key)) ++correct_covered;
    }
  }
}

TrafficStats& TrafficStats::operator+=(const TrafficStats& other) {
  for (int i = 0; i < kTierCount; ++i) per_tier[i] += other.per_tier[i];
  total += other.total;
  covered += other.covered;
  labeled_covered += other.labeled_covered;
  correct_covered += other.correct_covered;
  return *this;
}

double TrafficStats::coverage() const noexcept {
  return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
}

std::optional<double> TrafficStats::safety() const noexcept {
  if (labeled_covered == 0) return std::nullopt;
  return static_cast<double>(correct_covered) / static_cast<double>(labeled_covered);
}

std::optional<double> TrafficStats::unsafe_rate() const noexcept {
  if (labeled_covered == 0) return std::nullopt;
  return 1.0 - *safety();
}

SimulationResult simulate(std::span<const Query> dataset, Engine& engine) {
  for (const auto& q : dataset) q.validate();
  const auto pre = engine.precompute(dataset);
  SimulationResult out;
  out.resolutions.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Resolution r = engine.route(dataset[i], pre[i]);
    out.stats.record(r, dataset[i]);
    out.resolutions.push_back(std::move(r));
  }
  return out;
}

}  // namespace canoncache::cascade
