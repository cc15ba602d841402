// Serial reference vs OpenMP kernels. Run with --benchmark_filter=... to pick one.

#include <benchmark/benchmark.h>

#include <random>

#include "canoncache/metrics.hpp"
#include "canoncache/prototype.hpp"
#include "canoncache/risk.hpp"
#include "canoncache/synthetic.hpp"

using namespace canoncache;

namespace {

const synthetic::SyntheticCorpus& corpus() {
  static const auto c = [] {
    synthetic::SyntheticSpec s;
    s.n_classes = 64;
    s.n_per_class = 400;
    s.dim = 384;
    return synthetic::generate(s);
  }();
  return c;
}

const std::vector<std::string>& ids() {
  static const auto v = [] {
    std::vector<std::string> out;
    for (const auto& q : corpus().dataset) out.push_back(q.id);
    return out;
  }();
  return v;
}

const risk::CalibrationSet& big_cal() {
  static const auto c = [] {
    std::mt19937_64 rng(7);
    return risk::ConfidenceGenerator{}.draw(200000, rng);
  }();
  return c;
}

metrics::ContingencyTable table(std::size_t k, std::size_t n) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::string> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.push_back("i" + std::to_string(pick(rng)));
    b.push_back("k" + std::to_string(pick(rng)));
  }
  return metrics::build_contingency(a, b);
}

void BM_classify_serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(proto::serial::classify_batch(ids(), corpus().embeddings, corpus().model));
}
void BM_classify_omp(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(proto::classify_batch(ids(), corpus().embeddings, corpus().model));
}

void BM_sweep_serial(benchmark::State& st) {
  const auto grid = risk::uniform_grid(1000);
  for (auto _ : st) benchmark::DoNotOptimize(risk::serial::risk_coverage_sweep(big_cal(), grid));
}
void BM_sweep_omp(benchmark::State& st) {
  const auto grid = risk::uniform_grid(1000);
  for (auto _ : st) benchmark::DoNotOptimize(risk::risk_coverage_sweep(big_cal(), grid));
}

void BM_emi_serial(benchmark::State& st) {
  const auto t = table(static_cast<std::size_t>(st.range(0)), 5000);
  for (auto _ : st) benchmark::DoNotOptimize(metrics::serial::expected_mutual_information(t));
}
void BM_emi_omp(benchmark::State& st) {
  const auto t = table(static_cast<std::size_t>(st.range(0)), 5000);
  for (auto _ : st) benchmark::DoNotOptimize(metrics::expected_mutual_information(t));
}

risk::ValidationPlan small_plan() {
  risk::ValidationPlan p;
  p.trials = 200;
  p.n_test = 5000;
  return p;
}
const std::vector<risk::BoundSpec>& all_specs() {
  static const std::vector<risk::BoundSpec> s{
      {risk::BoundVariant::hoeffding_union}, {risk::BoundVariant::eb_union},
      {risk::BoundVariant::ltt_hoeffding}, {risk::BoundVariant::ltt_eb}};
  return s;
}
void BM_guarantee_serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(risk::serial::validate_guarantee(small_plan(), all_specs()));
}
void BM_guarantee_omp(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(risk::validate_guarantee(small_plan(), all_specs()));
}

}  // namespace

BENCHMARK(BM_classify_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_classify_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_sweep_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sweep_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_emi_serial)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_emi_omp)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_guarantee_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_guarantee_omp)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
