#include <benchmark/benchmark.h>

#include "bifinfer/continuation.hpp"
#include "bifinfer/detection.hpp"
#include "bifinfer/geometry.hpp"
#include "bifinfer/models.hpp"

using namespace bifinfer;

namespace {

ParameterVector chain_theta(int params) {
  ParameterVector theta;
  theta.values = Eigen::VectorXd::Constant(params, 0.5);
  return theta;
}

// dPsi/dtheta on a fixed diagram; this is what one optimizer step pays on top
// of the trace. Expected to grow like N^2.
void BM_MeasureGradient(benchmark::State& state) {
  const auto m = models::scaling_chain(static_cast<int>(state.range(0)), 4);
  const auto theta = chain_theta(4);
  const auto d = continuation::trace_branches(m, theta);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::grad_total_measure(m, theta, d));
  state.counters["samples"] = static_cast<double>(d.sample_count());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MeasureGradient)->RangeMultiplier(2)->Range(2, 32)->Unit(benchmark::kMillisecond)->Complexity();

void BM_Trace(benchmark::State& state) {
  const auto m = models::scaling_chain(static_cast<int>(state.range(0)), 4);
  const auto theta = chain_theta(4);
  for (auto _ : state) benchmark::DoNotOptimize(continuation::trace_branches(m, theta));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Trace)->RangeMultiplier(2)->Range(2, 32)->Unit(benchmark::kMillisecond)->Complexity();

void BM_TogglePredictions(benchmark::State& state) {
  const auto m = models::toggle_switch();
  const ParameterVector theta{1.14, 1.277, 0.019, 1.01, -0.261};  // two folds inside [3, 7]
  const auto d = continuation::trace_branches(m, theta);
  for (auto _ : state) benchmark::DoNotOptimize(detection::predictions(m, theta, d));
}
BENCHMARK(BM_TogglePredictions)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
