#pragma once

// Token-level API cost model for the tiered cache: per-request price from a
// token profile, monthly cost per traffic mix, sensitivity, volume scaling.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace canoncache::cost {

struct TokenProfile {
  long input_tokens = 0;
  long output_tokens = 0;
};

/// USD per million tokens.
struct PricePoint {
  double usd_per_m_input = 0.0;
  double usd_per_m_output = 0.0;

  bool is_free() const noexcept { return usd_per_m_input == 0.0 && usd_per_m_output == 0.0; }
};

struct TierEconomics {
  std::string tier_id;
  double traffic_share = 0.0;
  TokenProfile profile;
  PricePoint price;  // zero for tiers served locally
};

struct ScenarioResult {
  double monthly_cost_usd = 0.0;
  double savings_pct = 0.0;  // vs. the baseline passed to monthly_cost
  double local_share = 0.0;
};

double per_request_cost(const TokenProfile& profile, const PricePoint& price);

/// Throws Error{SharesInvalid} unless shares are in [0,1] and sum to 1 ± 1e-9.
void validate_shares(std::span<const TierEconomics> tiers);

/// Σ share · req/day · days · per-request cost. `baseline_cost` of 0 leaves savings at 0.
ScenarioResult monthly_cost(long requests_per_day, std::span<const TierEconomics> tiers,
                            int days = 30, double baseline_cost = 0.0);

/// Defaults: Feb-2026 prices and the measured token profiles.
struct CostConfig {
  PricePoint cheap_price{0.28, 0.42};   // tier 3
  PricePoint deep_price{3.00, 15.00};   // tier 4 and the no-cache baseline
  TokenProfile full_agent{1050, 1200};  // every request without a cache
  TokenProfile extraction{400, 100};    // tier-3 structured extraction
  TokenProfile deep_agent{2000, 3000};  // tier-4 multi-step reasoning
  int days = 30;
  // local / cheap / deep shares of the tiered strategy
  double local_share = 0.85;
  double cheap_share = 0.14;
  double deep_share = 0.01;
  double apc_hit_rate = 0.06;
  double gptcache_hit_rate = 0.379;
  // tier-3 : tier-4 ratio used when redistributing non-local traffic in sensitivity runs
  double sensitivity_cheap_weight = 5.0;
  double sensitivity_deep_weight = 1.0;

  /// Reads a YAML file; absent keys keep their defaults.
  static CostConfig load(const std::filesystem::path& file);
};

struct Strategy {
  std::string name;
  std::vector<TierEconomics> tiers;
};

Strategy no_cache_strategy(const CostConfig& cfg);
/// A cache with `hit_rate` free hits; misses pay the full-agent baseline price.
Strategy hit_rate_strategy(const CostConfig& cfg, std::string name, double hit_rate);
Strategy tiered_strategy(const CostConfig& cfg, double local, double cheap, double deep);

/// No cache, APC, GPTCache, and the five-tier cascade, in that order.
std::vector<Strategy> standard_strategies(const CostConfig& cfg);

struct StrategyResult {
  std::string name;
  ScenarioResult result;
};

std::vector<StrategyResult> compare_strategies(const CostConfig& cfg, long requests_per_day);

struct SensitivityPoint {
  double local_share;
  double cheap_share;
  double deep_share;
  ScenarioResult result;
};

/// For each local share, split the remainder cheap:deep by the given weights.
std::vector<SensitivityPoint> sensitivity(const CostConfig& cfg, std::span<const double> local_shares,
                                          long requests_per_day, double cheap_weight,
                                          double deep_weight);
std::vector<SensitivityPoint> sensitivity(const CostConfig& cfg, std::span<const double> local_shares,
                                          long requests_per_day);

struct ScalingRow {
  long requests_per_day;
  std::map<std::string, double> monthly_cost_usd;  // by strategy name
  double tiered_savings_pct;
};

std::vector<ScalingRow> scaling_table(const CostConfig& cfg, std::span<const long> requests_per_day);

}  // namespace canoncache::cost
