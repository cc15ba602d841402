#pragma once

// Risk-coverage analysis and risk-controlled threshold selection.
//
// R̂(τ) is the marginal unsafe rate: errors among covered examples divided by
// the full calibration size n. It is nonincreasing in τ, which is what lets
// the fixed-sequence (LTT) variants stop at the first failing threshold.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace canoncache::risk {

struct CalibrationRecord {
  double confidence;
  bool correct;
};

class CalibrationSet {
 public:
  explicit CalibrationSet(std::vector<CalibrationRecord> records);

  std::size_t n() const noexcept { return records_.size(); }
  std::span<const CalibrationRecord> records() const noexcept { return records_; }

  /// Covered count and covered-error count at τ, in O(log n).
  std::pair<std::size_t, std::size_t> covered_at(double tau) const;

 private:
  std::vector<CalibrationRecord> records_;
  // confidences sorted descending with prefix error counts, for fast sweeps
  std::vector<double> sorted_conf_;
  std::vector<std::size_t> prefix_errors_;
};

double empirical_risk(const CalibrationSet& cal, double tau);
double coverage(const CalibrationSet& cal, double tau);
/// Throws Error{NoCoverage} when nothing is covered at τ.
double safety(const CalibrationSet& cal, double tau);

enum class BoundVariant { hoeffding_union, eb_union, ltt_hoeffding, ltt_eb };

std::string_view variant_name(BoundVariant v) noexcept;
std::optional<BoundVariant> parse_variant(std::string_view name) noexcept;
bool is_ltt(BoundVariant v) noexcept;
bool is_empirical_bernstein(BoundVariant v) noexcept;

/// K equally spaced thresholds on [lo, hi]; K = 100 on [0, 0.99] gives steps of 0.01.
std::vector<double> uniform_grid(std::size_t k, double lo = 0.0, double hi = 0.99);

struct BoundSpec {
  BoundVariant variant = BoundVariant::ltt_eb;
  double alpha = 0.10;
  double delta = 0.10;
  std::vector<double> grid = uniform_grid(100);

  void validate() const;
};

/// Finite-sample correction C(n, K, δ); `vhat` is used only by EB variants.
double correction(BoundVariant variant, std::size_t n, std::size_t k, double delta,
                  double vhat = 0.0);

struct ThresholdCertificate {
  std::optional<double> tau_star;  // empty when infeasible
  BoundVariant variant = BoundVariant::ltt_eb;
  double alpha = 0.0;
  double delta = 0.0;
  std::size_t n = 0;
  double ucb_at_tau = 0.0;
  double calib_coverage = 0.0;

  bool feasible() const noexcept { return tau_star.has_value(); }
};

/// Upper confidence bound R̂(τ) + C at one threshold under `spec`.
double ucb(const CalibrationSet& cal, const BoundSpec& spec, double tau);

ThresholdCertificate select_threshold(const CalibrationSet& cal, const BoundSpec& spec);

struct CurvePoint {
  double tau;
  double coverage;
  std::optional<double> safety;  // undefined at zero coverage
  double risk;
};

/// One record per grid point. OpenMP over grid points.
std::vector<CurvePoint> risk_coverage_sweep(const CalibrationSet& cal, std::span<const double> grid);

// ---- Monte-Carlo validation of the (α, δ) guarantee ----

/// Confidence model: correctness probability p ~ floor + (1 - floor) Beta(μκ, (1-μ)κ)
/// with mean `accuracy`; `floor` = 1/K for a K-way argmax. Calibrated when the
/// reported confidence is p itself; overconfident reports σ-sharpened p.
struct ConfidenceGenerator {
  double accuracy = 0.9;
  std::size_t n_classes = 8;
  double concentration = 4.0;
  double overconfidence = 1.0;  // 1 = calibrated

  void validate() const;
  double floor() const noexcept { return 1.0 / static_cast<double>(n_classes); }
  /// Draws the true correctness probability p.
  double draw_p(std::mt19937_64& rng) const;
  /// Reported argmax confidence for probability p under this model.
  double report(double p) const;
  CalibrationSet draw(std::size_t n, std::mt19937_64& rng) const;
};

struct TrialOutcome {
  std::optional<double> tau_star;
  double test_risk = 0.0;
  bool violated = false;
};

struct GuaranteeResult {
  BoundVariant variant;
  double violation_rate = 0.0;
  std::vector<TrialOutcome> trials;
};

struct ValidationPlan {
  ConfidenceGenerator generator;
  std::size_t n_cal = 500;
  std::size_t n_test = 10000;
  std::size_t trials = 1000;
  std::uint64_t seed = 42;
};

/// Every variant sees identical calibration and test draws in each trial.
/// OpenMP over trials; per-trial seeds make the result thread-count independent.
std::vector<GuaranteeResult> validate_guarantee(const ValidationPlan& plan,
                                                std::span<const BoundSpec> specs);

/// Single-variant convenience wrapper returning the violation fraction.
double validate_guarantee(const ValidationPlan& plan, const BoundSpec& spec);

namespace serial {
std::vector<CurvePoint> risk_coverage_sweep(const CalibrationSet& cal, std::span<const double> grid);
std::vector<GuaranteeResult> validate_guarantee(const ValidationPlan& plan,
                                                std::span<const BoundSpec> specs);
}  // namespace serial

}  // namespace canoncache::risk
