#include "canoncache/cost.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>

#include "canoncache/core.hpp"

namespace canoncache::cost {

double per_request_cost(const TokenProfile& profile, const PricePoint& price) {
  if (profile.input_tokens < 0 || profile.output_tokens < 0 || price.usd_per_m_input < 0.0 ||
      price.usd_per_m_output < 0.0) {
    throw Error(ErrorCode::InvalidParams, "token counts and prices must be nonnegative");
  }
  return static_cast<double>(profile.input_tokens) * price.usd_per_m_input / 1e6 +
         static_cast<double>(profile.output_tokens) * price.usd_per_m_output / 1e6;
}

void validate_shares(std::span<const TierEconomics> tiers) {
  double sum = 0.0;
  for (const auto& t : tiers) {
    if (!(t.traffic_share >= 0.0 && t.traffic_share <= 1.0)) {
      throw Error(ErrorCode::SharesInvalid, "traffic share of '" + t.tier_id + "' outside [0,1]");
    }
    sum += t.traffic_share;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::SharesInvalid, "traffic shares sum to " + std::to_string(sum));
  }
}

ScenarioResult monthly_cost(long requests_per_day, std::span<const TierEconomics> tiers, int days,
                            double baseline_cost) {
  validate_shares(tiers);
  if (requests_per_day < 0 || days < 0) {
    throw Error(ErrorCode::InvalidParams, "request volume and days must be nonnegative");
  }
  const double volume = static_cast<double>(requests_per_day) * static_cast<double>(days);
  ScenarioResult r;
  for (const auto& t : tiers) {
    r.monthly_cost_usd += t.traffic_share * volume * per_request_cost(t.profile, t.price);
    if (t.price.is_free()) r.local_share += t.traffic_share;
  }
  if (baseline_cost > 0.0) r.savings_pct = 100.0 * (1.0 - r.monthly_cost_usd / baseline_cost);
  return r;
}

namespace {

void read_price(const YAML::Node& node, PricePoint& p) {
  if (!node) return;
  if (node["usd_per_m_input"]) p.usd_per_m_input = node["usd_per_m_input"].as<double>();
  if (node["usd_per_m_output"]) p.usd_per_m_output = node["usd_per_m_output"].as<double>();
}

void read_profile(const YAML::Node& node, TokenProfile& p) {
  if (!node) return;
  if (node["input_tokens"]) p.input_tokens = node["input_tokens"].as<long>();
  if (node["output_tokens"]) p.output_tokens = node["output_tokens"].as<long>();
}

template <typename T>
void read_scalar(const YAML::Node& node, const char* key, T& out) {
  if (node && node[key]) out = node[key].as<T>();
}

}  // namespace

CostConfig CostConfig::load(const std::filesystem::path& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::Io, "cannot read cost config " + file.string() + ": " + e.what());
  }
  CostConfig cfg;
  try {
    read_price(root["prices"]["cheap"], cfg.cheap_price);
    read_price(root["prices"]["deep"], cfg.deep_price);
    read_profile(root["profiles"]["full_agent"], cfg.full_agent);
    read_profile(root["profiles"]["extraction"], cfg.extraction);
    read_profile(root["profiles"]["deep_agent"], cfg.deep_agent);
    read_scalar(root, "days", cfg.days);
    read_scalar(root["traffic"], "local", cfg.local_share);
    read_scalar(root["traffic"], "cheap", cfg.cheap_share);
    read_scalar(root["traffic"], "deep", cfg.deep_share);
    read_scalar(root["baselines"], "apc_hit_rate", cfg.apc_hit_rate);
    read_scalar(root["baselines"], "gptcache_hit_rate", cfg.gptcache_hit_rate);
    read_scalar(root["sensitivity"], "cheap_weight", cfg.sensitivity_cheap_weight);
    read_scalar(root["sensitivity"], "deep_weight", cfg.sensitivity_deep_weight);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::Validation, "bad cost config " + file.string() + ": " + e.what());
  }
  return cfg;
}

Strategy no_cache_strategy(const CostConfig& cfg) {
  return {"no_cache", {{"llm", 1.0, cfg.full_agent, cfg.deep_price}}};
}

Strategy hit_rate_strategy(const CostConfig& cfg, std::string name, double hit_rate) {
  return {std::move(name),
          {{"cache_hit", hit_rate, {}, {}}, {"llm", 1.0 - hit_rate, cfg.full_agent, cfg.deep_price}}};
}

Strategy tiered_strategy(const CostConfig& cfg, double local, double cheap, double deep) {
  return {"w5h2",
          {{"local", local, {}, {}},
           {"tier3", cheap, cfg.extraction, cfg.cheap_price},
           {"tier4", deep, cfg.deep_agent, cfg.deep_price}}};
}

std::vector<Strategy> standard_strategies(const CostConfig& cfg) {
  return {no_cache_strategy(cfg), hit_rate_strategy(cfg, "apc", cfg.apc_hit_rate),
          hit_rate_strategy(cfg, "gptcache", cfg.gptcache_hit_rate),
          tiered_strategy(cfg, cfg.local_share, cfg.cheap_share, cfg.deep_share)};
}

std::vector<StrategyResult> compare_strategies(const CostConfig& cfg, long requests_per_day) {
  const auto strategies = standard_strategies(cfg);
  const double baseline =
      monthly_cost(requests_per_day, strategies.front().tiers, cfg.days).monthly_cost_usd;
  std::vector<StrategyResult> out;
  for (const auto& s : strategies) {
    out.push_back({s.name, monthly_cost(requests_per_day, s.tiers, cfg.days, baseline)});
  }
  return out;
}

std::vector<SensitivityPoint> sensitivity(const CostConfig& cfg, std::span<const double> local_shares,
                                          long requests_per_day, double cheap_weight,
                                          double deep_weight) {
  if (!(cheap_weight >= 0.0 && deep_weight >= 0.0 && cheap_weight + deep_weight > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "remainder split weights must be nonnegative, not both 0");
  }
  const double baseline =
      monthly_cost(requests_per_day, no_cache_strategy(cfg).tiers, cfg.days).monthly_cost_usd;
  std::vector<SensitivityPoint> out;
  for (double local : local_shares) {
    if (!(local >= 0.0 && local <= 1.0)) {
      throw Error(ErrorCode::InvalidParams, "local share outside [0,1]");
    }
    const double rest = 1.0 - local;
    const double cheap = rest * cheap_weight / (cheap_weight + deep_weight);
    const double deep = rest - cheap;
    const auto s = tiered_strategy(cfg, local, cheap, deep);
    out.push_back({local, cheap, deep, monthly_cost(requests_per_day, s.tiers, cfg.days, baseline)});
  }
  return out;
}

std::vector<SensitivityPoint> sensitivity(const CostConfig& cfg, std::span<const double> local_shares,
                                          long requests_per_day) {
  return sensitivity(cfg, local_shares, requests_per_day, cfg.sensitivity_cheap_weight,
                     cfg.sensitivity_deep_weight);
}

std::vector<ScalingRow> scaling_table(const CostConfig& cfg, std::span<const long> requests_per_day) {
  std::vector<ScalingRow> rows;
  for (long rpd : requests_per_day) {
    ScalingRow row{rpd, {}, 0.0};
    for (const auto& r : compare_strategies(cfg, rpd)) {
      row.monthly_cost_usd[r.name] = r.result.monthly_cost_usd;
      if (r.name == "w5h2") row.tiered_savings_pct = r.result.savings_pct;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace canoncache::cost
