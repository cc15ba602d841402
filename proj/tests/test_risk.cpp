#include <doctest.h>

#include <cmath>
#include <random>

#include "canoncache/core.hpp"
#include "canoncache/risk.hpp"

using namespace canoncache;
using namespace canoncache::risk;

namespace {

CalibrationSet random_set(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CalibrationRecord> r;
  for (std::size_t i = 0; i < n; ++i) {
    // coarse confidences so ties with grid points and each other happen
    const double c = std::round(u(rng) * 20.0) / 20.0;
    r.push_back({c, u(rng) < 0.8});
  }
  return CalibrationSet(std::move(r));
}

double brute_risk(const CalibrationSet& cal, double tau) {
  double e = 0.0;
  for (const auto& r : cal.records()) e += (r.confidence >= tau && !r.correct) ? 1.0 : 0.0;
  return e / static_cast<double>(cal.n());
}

double brute_cov(const CalibrationSet& cal, double tau) {
  double c = 0.0;
  for (const auto& r : cal.records()) c += r.confidence >= tau ? 1.0 : 0.0;
  return c / static_cast<double>(cal.n());
}

}  // namespace

TEST_CASE("corrections at published operating points") {
  CHECK(std::abs(correction(BoundVariant::hoeffding_union, 134, 100, 0.10) - 0.161) <= 0.001);
  CHECK(std::abs(correction(BoundVariant::ltt_hoeffding, 134, 100, 0.10) - 0.0927) <= 0.0005);
  CHECK(std::abs(correction(BoundVariant::ltt_eb, 100, 100, 0.10, 0.0) - 0.1020) <= 0.0005);
}

TEST_CASE("correction formulas") {
  const double n = 500.0;
  CHECK(correction(BoundVariant::hoeffding_union, 500, 100, 0.1) ==
        doctest::Approx(std::sqrt(std::log(100 / 0.1) / (2 * n))));
  CHECK(correction(BoundVariant::ltt_hoeffding, 500, 100, 0.1) ==
        doctest::Approx(std::sqrt(std::log(1 / 0.1) / (2 * n))));
  const double v = 0.09;
  CHECK(correction(BoundVariant::ltt_eb, 500, 100, 0.1, v) ==
        doctest::Approx(std::sqrt(2 * v * std::log(3 / 0.1) / n) + 3 * std::log(3 / 0.1) / n));
  CHECK(correction(BoundVariant::eb_union, 500, 100, 0.1, v) ==
        doctest::Approx(std::sqrt(2 * v * std::log(300 / 0.1) / n) + 3 * std::log(300 / 0.1) / n));
  // dominance: LTT never pays the union penalty; equal at K = 1
  for (std::size_t k : {1u, 2u, 10u, 100u}) {
    const double h = correction(BoundVariant::hoeffding_union, 200, k, 0.1);
    const double l = correction(BoundVariant::ltt_hoeffding, 200, k, 0.1);
    if (k == 1) {
      CHECK(h == doctest::Approx(l));
    } else {
      CHECK(l < h);
    }
  }
}

TEST_CASE("bound spec validation") {
  BoundSpec s;
  s.validate();
  s.alpha = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.alpha = 0.1;
  s.delta = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.delta = 0.1;
  s.grid.clear();
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("default grid") {
  const auto g = uniform_grid(100);
  REQUIRE(g.size() == 100);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(0.99));
  CHECK(g[45] == 0.45);
  CHECK(parse_variant("ltt_eb") == BoundVariant::ltt_eb);
  CHECK_FALSE(parse_variant("pac_bayes").has_value());
}

TEST_CASE("empirical risk and coverage agree with brute force and are monotone") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cal = random_set(rng, 1 + trial * 3);
    const auto grid = uniform_grid(101, 0.0, 1.0);
    double prev_r = 2.0, prev_c = 2.0;
    for (double tau : grid) {
      const double r = empirical_risk(cal, tau);
      const double c = coverage(cal, tau);
      CHECK(r == doctest::Approx(brute_risk(cal, tau)));
      CHECK(c == doctest::Approx(brute_cov(cal, tau)));
      CHECK(r <= prev_r);
      CHECK(c <= prev_c);
      prev_r = r;
      prev_c = c;
    }
  }
}

TEST_CASE("safety requires coverage") {
  CalibrationSet cal({{0.3, true}, {0.6, false}});
  CHECK(safety(cal, 0.5) == 0.0);
  CHECK(safety(cal, 0.0) == 0.5);
  try {
    safety(cal, 0.9);
    FAIL("expected NoCoverage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoCoverage);
  }
}

TEST_CASE("threshold selection") {
  std::mt19937_64 rng(1);
  SUBCASE("certificates are sound and LTT dominates Hoeffding") {
    for (int trial = 0; trial < 200; ++trial) {
      const ConfidenceGenerator gen{0.9, 8};
      const auto cal = gen.draw(500, rng);
      std::optional<double> taus[4];
      int i = 0;
      for (auto v : {BoundVariant::hoeffding_union, BoundVariant::eb_union, BoundVariant::ltt_hoeffding,
                     BoundVariant::ltt_eb}) {
        BoundSpec spec{v, 0.10, 0.10};
        const auto cert = select_threshold(cal, spec);
        CHECK(cert.n == 500);
        if (cert.feasible()) {
          CHECK(cert.ucb_at_tau <= 0.10);
          CHECK(cert.calib_coverage == coverage(cal, *cert.tau_star));
        }
        taus[i++] = cert.tau_star;
      }
      const double inf = 1e9;
      CHECK(taus[2].value_or(inf) <= taus[0].value_or(inf));
    }
  }
  SUBCASE("no errors: the smallest threshold is certified") {
    std::vector<CalibrationRecord> r(200, {0.7, true});
    const auto cert = select_threshold(CalibrationSet(r), BoundSpec{BoundVariant::ltt_hoeffding, 0.2, 0.1});
    REQUIRE(cert.feasible());
    CHECK(*cert.tau_star == 0.0);
  }
  SUBCASE("all errors and tiny n: infeasible") {
    std::vector<CalibrationRecord> r(5, {0.995, false});
    for (auto v : {BoundVariant::hoeffding_union, BoundVariant::ltt_eb}) {
      const auto cert = select_threshold(CalibrationSet(r), BoundSpec{v, 0.05, 0.1});
      CHECK_FALSE(cert.feasible());
      CHECK(cert.ucb_at_tau > 0.05);
    }
  }
  SUBCASE("LTT stops at the first failing threshold") {
    // errors sit at 0.98, so only the empty top threshold passes
    std::vector<CalibrationRecord> r;
    for (int i = 0; i < 400; ++i) r.push_back({0.3, true});
    for (int i = 0; i < 100; ++i) r.push_back({0.98, false});
    const auto cert = select_threshold(CalibrationSet(r), BoundSpec{BoundVariant::ltt_hoeffding, 0.1, 0.1});
    REQUIRE(cert.feasible());
    CHECK(*cert.tau_star == doctest::Approx(0.99));
    CHECK(cert.calib_coverage == 0.0);
  }
}

TEST_CASE("sweep matches brute force; parallel equals serial") {
  std::mt19937_64 rng(4);
  const auto cal = random_set(rng, 777);
  const auto grid = uniform_grid(100);
  const auto par = risk_coverage_sweep(cal, grid);
  const auto ser = serial::risk_coverage_sweep(cal, grid);
  REQUIRE(par.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(par[i].tau == ser[i].tau);
    CHECK(par[i].coverage == ser[i].coverage);
    CHECK(par[i].risk == ser[i].risk);
    CHECK(par[i].safety == ser[i].safety);
    CHECK(par[i].risk == doctest::Approx(brute_risk(cal, grid[i])));
    if (par[i].coverage > 0.0) {
      REQUIRE(par[i].safety.has_value());
      CHECK(1.0 - *par[i].safety == doctest::Approx(par[i].risk / par[i].coverage));
    } else {
      CHECK_FALSE(par[i].safety.has_value());
    }
  }
}

TEST_CASE("confidence generator") {
  std::mt19937_64 rng(12);
  SUBCASE("calibrated: safety(tau) tracks tau on a large log") {
    const ConfidenceGenerator gen{0.85, 8};
    const auto cal = gen.draw(20000, rng);
    double acc = 0.0;
    for (const auto& r : cal.records()) acc += r.correct ? 1.0 : 0.0;
    CHECK(std::abs(acc / 20000 - 0.85) < 0.015);
    for (double tau : uniform_grid(100)) {
      if (coverage(cal, tau) * 20000 < 200) continue;
      CHECK(safety(cal, tau) >= tau - 0.02);
    }
  }
  SUBCASE("accuracy 1 yields no errors") {
    const auto cal = ConfidenceGenerator{1.0, 4}.draw(1000, rng);
    for (const auto& r : cal.records()) CHECK(r.correct);
  }
  SUBCASE("overconfident reports exceed p above the floor") {
    const ConfidenceGenerator gen{0.8, 2, 4.0, 3.0};
    for (double p : {0.55, 0.7, 0.9}) CHECK(gen.report(p) > p);
    // K = 2 reduces to a logistic sharpening of the logit
    const double p = 0.7;
    CHECK(gen.report(p) == doctest::Approx(1.0 / (1.0 + std::pow((1 - p) / p, 3.0))));
  }
  SUBCASE("invalid specs") {
    CHECK_THROWS_AS((ConfidenceGenerator{0.05, 8}.validate()), Error);
    CHECK_THROWS_AS((ConfidenceGenerator{1.2, 8}.validate()), Error);
    CHECK_THROWS_AS((ConfidenceGenerator{0.9, 1}.validate()), Error);
  }
}

TEST_CASE("guarantee validator: parallel equals serial, degenerate generator never violates") {
  ValidationPlan plan;
  plan.trials = 60;
  plan.n_test = 2000;
  const std::vector<BoundSpec> specs{{BoundVariant::hoeffding_union}, {BoundVariant::ltt_eb}};
  const auto par = validate_guarantee(plan, specs);
  const auto ser = serial::validate_guarantee(plan, specs);
  REQUIRE(par.size() == 2);
  for (std::size_t v = 0; v < 2; ++v) {
    CHECK(par[v].violation_rate == ser[v].violation_rate);
    for (std::size_t t = 0; t < plan.trials; ++t) {
      CHECK(par[v].trials[t].tau_star == ser[v].trials[t].tau_star);
      CHECK(par[v].trials[t].test_risk == ser[v].trials[t].test_risk);
    }
  }
  ValidationPlan perfect = plan;
  perfect.generator.accuracy = 1.0;
  CHECK(validate_guarantee(perfect, BoundSpec{}) == 0.0);
}
