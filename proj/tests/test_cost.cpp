#include <doctest.h>

#include <cmath>
#include <map>

#include "canoncache/core.hpp"
#include "canoncache/cost.hpp"

using namespace canoncache;
using namespace canoncache::cost;

namespace {

std::map<std::string, ScenarioResult> by_name(const CostConfig& cfg, long rpd) {
  std::map<std::string, ScenarioResult> m;
  for (const auto& r : compare_strategies(cfg, rpd)) m[r.name] = r.result;
  return m;
}

}  // namespace

TEST_CASE("per-request cost") {
  const CostConfig cfg;
  CHECK(per_request_cost(cfg.full_agent, cfg.deep_price) == doctest::Approx(0.02115));
  CHECK(per_request_cost(cfg.extraction, cfg.cheap_price) == doctest::Approx(0.000154));
  CHECK(per_request_cost(cfg.deep_agent, cfg.deep_price) == doctest::Approx(0.051));
  CHECK(per_request_cost({0, 0}, {}) == 0.0);
  CHECK_THROWS_AS(per_request_cost({-1, 0}, {}), Error);
}

TEST_CASE("strategy comparison at 50 requests per day") {
  const auto m = by_name(CostConfig{}, 50);
  CHECK(std::abs(m.at("no_cache").monthly_cost_usd - 31.72) <= 0.01);
  CHECK(std::abs(m.at("apc").monthly_cost_usd - 29.82) <= 0.01);
  CHECK(std::abs(m.at("gptcache").monthly_cost_usd - 19.70) <= 0.01);
  CHECK(std::abs(m.at("w5h2").monthly_cost_usd - 0.80) <= 0.01);
  CHECK(m.at("no_cache").savings_pct == 0.0);
  CHECK(m.at("w5h2").savings_pct == doctest::Approx(97.49).epsilon(1e-3));
  CHECK(m.at("w5h2").local_share == doctest::Approx(0.85));
}

TEST_CASE("scaling rows") {
  const std::vector<long> volumes{50, 200, 1000, 10000, 100000};
  const auto rows = scaling_table(CostConfig{}, volumes);
  // published rows: no cache / GPTCache / tiered
  const double expected[5][3] = {{31.72, 19.70, 0.80},
                                 {126.90, 78.80, 3.19},
                                 {634.50, 394.02, 15.95},
                                 {6345, 3940, 159},
                                 {63450, 39402, 1595}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::abs(rows[i].monthly_cost_usd.at("no_cache") - expected[i][0]) <= 1.0);
    CHECK(std::abs(rows[i].monthly_cost_usd.at("gptcache") - expected[i][1]) <= 1.0);
    CHECK(std::abs(rows[i].monthly_cost_usd.at("w5h2") - expected[i][2]) <= 1.0);
    CHECK(std::abs(rows[i].tiered_savings_pct - 97.5) <= 0.05);
  }
}

TEST_CASE("sensitivity") {
  const CostConfig cfg;
  const std::vector<double> locals{0.5, 0.7, 0.85, 1.0};
  const auto pts = sensitivity(cfg, locals, 50);
  REQUIRE(pts.size() == 4);
  CHECK(std::abs(pts[1].result.monthly_cost_usd - 3.88) <= 0.05);
  CHECK(pts[1].cheap_share == doctest::Approx(0.25));
  CHECK(pts[1].deep_share == doctest::Approx(0.05));
  CHECK(pts[3].result.monthly_cost_usd == 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].result.monthly_cost_usd < pts[i - 1].result.monthly_cost_usd);
  }
  // a 14:1 remainder split is far cheaper than the published 70% point
  const auto alt = sensitivity(cfg, std::vector<double>{0.7}, 50, 14.0, 1.0);
  CHECK(alt[0].result.monthly_cost_usd == doctest::Approx(1.6).epsilon(0.01));
  CHECK_THROWS_AS(sensitivity(cfg, std::vector<double>{1.2}, 50), Error);
  CHECK_THROWS_AS(sensitivity(cfg, locals, 50, 0.0, 0.0), Error);
}

TEST_CASE("share validation") {
  std::vector<TierEconomics> tiers{{"a", 0.5, {}, {}}, {"b", 0.4, {}, {}}};
  try {
    validate_shares(tiers);
    FAIL("expected SharesInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SharesInvalid);
  }
  tiers[1].traffic_share = 0.5;
  validate_shares(tiers);
  tiers[1].traffic_share = -0.1;
  tiers[0].traffic_share = 1.1;
  CHECK_THROWS_AS(validate_shares(tiers), Error);
}

TEST_CASE("monthly cost is linear in volume") {
  const auto s = tiered_strategy(CostConfig{}, 0.85, 0.14, 0.01);
  const double one = monthly_cost(1, s.tiers).monthly_cost_usd;
  for (long v : {10L, 1000L, 123457L}) {
    CHECK(monthly_cost(v, s.tiers).monthly_cost_usd == doctest::Approx(one * static_cast<double>(v)));
  }
  CHECK(monthly_cost(50, s.tiers, 31).monthly_cost_usd ==
        doctest::Approx(monthly_cost(50, s.tiers, 30).monthly_cost_usd * 31.0 / 30.0));
}
