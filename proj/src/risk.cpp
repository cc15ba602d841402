#include "canoncache/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "canoncache/core.hpp"

namespace canoncache::risk {

CalibrationSet::CalibrationSet(std::vector<CalibrationRecord> records)
    : records_(std::move(records)) {
  if (records_.empty()) throw Error(ErrorCode::EmptyInput, "calibration set is empty");
  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (const auto& r : records_) {
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw Error(ErrorCode::Validation, "calibration confidence out of [0,1]");
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records_[a].confidence > records_[b].confidence;
  });
  sorted_conf_.reserve(records_.size());
  prefix_errors_.assign(records_.size() + 1, 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_conf_.push_back(records_[order[k]].confidence);
    prefix_errors_[k + 1] = prefix_errors_[k] + (records_[order[k]].correct ? 0 : 1);
  }
}

std::pair<std::size_t, std::size_t> CalibrationSet::covered_at(double tau) const {
  const auto it = std::partition_point(sorted_conf_.begin(), sorted_conf_.end(),
                                       [tau](double c) { return c >= tau; });
  const auto covered = static_cast<std::size_t>(it - sorted_conf_.begin());
  return {covered, prefix_errors_[covered]};
}

double empirical_risk(const CalibrationSet& cal, double tau) {
  return static_cast<double>(cal.covered_at(tau).second) / static_cast<double>(cal.n());
}

double coverage(const CalibrationSet& cal, double tau) {
  return static_cast<double>(cal.covered_at(tau).first) / static_cast<double>(cal.n());
}

double safety(const CalibrationSet& cal, double tau) {
  const auto [covered, errors] = cal.covered_at(tau);
  if (covered == 0) throw Error(ErrorCode::NoCoverage, "no calibration example is covered");
  return static_cast<double>(covered - errors) / static_cast<double>(covered);
}

std::string_view variant_name(BoundVariant v) noexcept {
  switch (v) {
    case BoundVariant::hoeffding_union: return "hoeffding_union";
    case BoundVariant::eb_union: return "eb_union";
    case BoundVariant::ltt_hoeffding: return "ltt_hoeffding";
    case BoundVariant::ltt_eb: return "ltt_eb";
  }
  return "";
}

std::optional<BoundVariant> parse_variant(std::string_view name) noexcept {
  for (auto v : {BoundVariant::hoeffding_union, BoundVariant::eb_union,
                 BoundVariant::ltt_hoeffding, BoundVariant::ltt_eb}) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

bool is_ltt(BoundVariant v) noexcept {
  return v == BoundVariant::ltt_hoeffding || v == BoundVariant::ltt_eb;
}

bool is_empirical_bernstein(BoundVariant v) noexcept {
  return v == BoundVariant::eb_union || v == BoundVariant::ltt_eb;
}

std::vector<double> uniform_grid(std::size_t k, double lo, double hi) {
  if (k == 0) throw Error(ErrorCode::InvalidParams, "grid needs at least one threshold");
  if (k == 1) return {lo};
  std::vector<double> grid(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
    grid[i] = std::round(x * 1e12) / 1e12;  // 0.45, not 0.44999999999999996
  }
  return grid;
}

void BoundSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidParams, "alpha must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::InvalidParams, "delta must lie in (0,1)");
  if (grid.empty()) throw Error(ErrorCode::InvalidParams, "threshold grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidParams, "grid thresholds must lie in [0,1]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw Error(ErrorCode::InvalidParams, "grid must be strictly increasing");
    }
  }
}

double correction(BoundVariant variant, std::size_t n, std::size_t k, double delta, double vhat) {
  if (n == 0 || k == 0) throw Error(ErrorCode::InvalidParams, "correction needs n >= 1 and K >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::InvalidParams, "delta must lie in (0,1)");
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  switch (variant) {
    case BoundVariant::hoeffding_union: return std::sqrt(std::log(kk / delta) / (2.0 * nn));
    case BoundVariant::ltt_hoeffding: return std::sqrt(std::log(1.0 / delta) / (2.0 * nn));
    case BoundVariant::eb_union:
    case BoundVariant::ltt_eb: {
      if (!(vhat >= 0.0 && vhat <= 0.25)) {
        throw Error(ErrorCode::InvalidParams, "Bernoulli variance must lie in [0, 0.25]");
      }
      // union variant splits δ across the K thresholds
      const double d = variant == BoundVariant::eb_union ? delta / kk : delta;
      const double log_term = std::log(3.0 / d);
      return std::sqrt(2.0 * vhat * log_term / nn) + 3.0 * log_term / nn;
    }
  }
  throw Error(ErrorCode::InvalidParams, "unknown bound variant");
}

double ucb(const CalibrationSet& cal, const BoundSpec& spec, double tau) {
  const double r = empirical_risk(cal, tau);
  const double vhat = is_empirical_bernstein(spec.variant) ? r * (1.0 - r) : 0.0;
  return r + correction(spec.variant, cal.n(), spec.grid.size(), spec.delta, vhat);
}

ThresholdCertificate select_threshold(const CalibrationSet& cal, const BoundSpec& spec) {
  spec.validate();
  ThresholdCertificate cert;
  cert.variant = spec.variant;
  cert.alpha = spec.alpha;
  cert.delta = spec.delta;
  cert.n = cal.n();

  std::optional<double> chosen;
  double chosen_ucb = 0.0;
  if (is_ltt(spec.variant)) {
    // fixed-sequence: walk down from the highest threshold, stop at the first failure
    for (auto it = spec.grid.rbegin(); it != spec.grid.rend(); ++it) {
      const double u = ucb(cal, spec, *it);
      if (u > spec.alpha) break;
      chosen = *it;
      chosen_ucb = u;
    }
  } else {
    for (double tau : spec.grid) {
      const double u = ucb(cal, spec, tau);
      if (u <= spec.alpha) {
        chosen = tau;
        chosen_ucb = u;
        break;
      }
    }
  }

  if (chosen) {
    cert.tau_star = chosen;
    cert.ucb_at_tau = chosen_ucb;
    cert.calib_coverage = coverage(cal, *chosen);
  } else {
    // report the tightest bound seen so callers can see how far off feasibility is
    double best = std::numeric_limits<double>::infinity();
    for (double tau : spec.grid) best = std::min(best, ucb(cal, spec, tau));
    cert.ucb_at_tau = best;
    cert.calib_coverage = 0.0;
  }
  return cert;
}

namespace {

CurvePoint curve_point(const CalibrationSet& cal, double tau) {
  const auto [covered, errors] = cal.covered_at(tau);
  const double n = static_cast<double>(cal.n());
  CurvePoint p{tau, static_cast<double>(covered) / n, std::nullopt,
               static_cast<double>(errors) / n};
  if (covered > 0) {
    p.safety = static_cast<double>(covered - errors) / static_cast<double>(covered);
  }
  return p;
}

std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

std::vector<TrialOutcome> run_trial(const ValidationPlan& plan, std::span<const BoundSpec> specs,
                                    std::size_t trial) {
  auto rng = trial_rng(plan.seed, trial);
  const CalibrationSet cal = plan.generator.draw(plan.n_cal, rng);
  const CalibrationSet test = plan.generator.draw(plan.n_test, rng);
  std::vector<TrialOutcome> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    const auto cert = select_threshold(cal, spec);
    TrialOutcome o;
    o.tau_star = cert.tau_star;
    if (cert.tau_star) {
      o.test_risk = empirical_risk(test, *cert.tau_star);
      o.violated = o.test_risk > spec.alpha;
    }
    out.push_back(o);
  }
  return out;
}

std::vector<GuaranteeResult> collect(std::span<const BoundSpec> specs,
                                     std::vector<std::vector<TrialOutcome>>& per_trial) {
  std::vector<GuaranteeResult> results;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    GuaranteeResult r{specs[s].variant, 0.0, {}};
    r.trials.reserve(per_trial.size());
    std::size_t violations = 0;
    for (auto& trial : per_trial) {
      violations += trial[s].violated ? 1 : 0;
      r.trials.push_back(trial[s]);
    }
    r.violation_rate = per_trial.empty()
                           ? 0.0
                           : static_cast<double>(violations) / static_cast<double>(per_trial.size());
    results.push_back(std::move(r));
  }
  return results;
}

void check_plan(const ValidationPlan& plan, std::span<const BoundSpec> specs) {
  plan.generator.validate();
  if (plan.trials < 1 || plan.n_cal < 1 || plan.n_test < 1) {
    throw Error(ErrorCode::InvalidParams, "validation plan needs positive sizes");
  }
  for (const auto& s : specs) s.validate();
}

}  // namespace

std::vector<CurvePoint> risk_coverage_sweep(const CalibrationSet& cal, std::span<const double> grid) {
  std::vector<CurvePoint> out(grid.size());
  const auto k = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < k; ++i) out[i] = curve_point(cal, grid[i]);
  return out;
}

std::vector<GuaranteeResult> validate_guarantee(const ValidationPlan& plan,
                                                std::span<const BoundSpec> specs) {
  check_plan(plan, specs);
  std::vector<std::vector<TrialOutcome>> per_trial(plan.trials);
  const auto trials = static_cast<std::ptrdiff_t>(plan.trials);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < trials; ++t) {
    per_trial[t] = run_trial(plan, specs, static_cast<std::size_t>(t));
  }
  return collect(specs, per_trial);
}

double validate_guarantee(const ValidationPlan& plan, const BoundSpec& spec) {
  return validate_guarantee(plan, std::span<const BoundSpec>(&spec, 1)).front().violation_rate;
}

namespace serial {

std::vector<CurvePoint> risk_coverage_sweep(const CalibrationSet& cal, std::span<const double> grid) {
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  for (double tau : grid) out.push_back(curve_point(cal, tau));
  return out;
}

std::vector<GuaranteeResult> validate_guarantee(const ValidationPlan& plan,
                                                std::span<const BoundSpec> specs) {
  check_plan(plan, specs);
  std::vector<std::vector<TrialOutcome>> per_trial;
  per_trial.reserve(plan.trials);
  for (std::size_t t = 0; t < plan.trials; ++t) per_trial.push_back(run_trial(plan, specs, t));
  return collect(specs, per_trial);
}

}  // namespace serial

void ConfidenceGenerator::validate() const {
  if (n_classes < 2) throw Error(ErrorCode::InvalidSpec, "generator needs at least two classes");
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "accuracy must lie in [0,1]");
  }
  if (accuracy < floor()) {
    throw Error(ErrorCode::InvalidSpec,
                "calibrated argmax confidence cannot have accuracy below 1/K");
  }
  if (!(concentration > 0.0)) throw Error(ErrorCode::InvalidSpec, "concentration must be positive");
  if (!(overconfidence >= 1.0)) throw Error(ErrorCode::InvalidSpec, "overconfidence scale must be >= 1");
}

double ConfidenceGenerator::draw_p(std::mt19937_64& rng) const {
  const double lo = floor();
  const double mu = (accuracy - lo) / (1.0 - lo);
  if (mu >= 1.0) return 1.0;
  double b = 0.0;
  if (mu > 0.0) {
    std::gamma_distribution<double> ga(mu * concentration, 1.0);
    std::gamma_distribution<double> gb((1.0 - mu) * concentration, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    b = (x + y) > 0.0 ? x / (x + y) : mu;
  }
  // keep p strictly inside (1/K, 1) so argmax is unique and logits stay finite
  return std::clamp(lo + (1.0 - lo) * b, lo + 1e-9, 1.0 - 1e-12);
}

double ConfidenceGenerator::report(double p) const {
  if (overconfidence == 1.0 || p >= 1.0) return p;
  const double k1 = static_cast<double>(n_classes - 1);
  // softmax confidence when the calibrated logit gap is multiplied by `overconfidence`
  const double ratio = std::pow(k1, 1.0 - overconfidence) * std::pow((1.0 - p) / p, overconfidence);
  return 1.0 / (1.0 + ratio);
}

CalibrationSet ConfidenceGenerator::draw(std::size_t n, std::mt19937_64& rng) const {
  std::vector<CalibrationRecord> records;
  records.reserve(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = draw_p(rng);
    const bool correct = unif(rng) < p;
    records.push_back({report(p), correct});
  }
  return CalibrationSet(std::move(records));
}

}  // namespace canoncache::risk
