// Serial reference versus OpenMP kernels. The benchmark argument selects the
// execution policy: 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "ctrl_duality/bsde.hpp"
#include "ctrl_duality/cva.hpp"
#include "ctrl_duality/dual.hpp"
#include "ctrl_duality/payoffs.hpp"

using namespace ctrl_duality;

namespace {

Execution policy(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

UvmSpec call_spread() {
  UvmSpec u;
  u.payoff = payoffs::call_spread(90.0, 110.0);
  return u;
}

void BM_SampleNoise(benchmark::State& state) {
  const UvmSpec u = call_spread();
  const auto grid = make_time_grid(1.0, 50);
  for (auto _ : state) {
    auto batch = sample_noise(grid, 1, u.reference_correlation(), 1 << 14, 1, policy(state));
    benchmark::DoNotOptimize(batch);
  }
  label(state);
}

void BM_BackwardSweep(benchmark::State& state) {
  const UvmSpec u = call_spread();
  const auto batch = sample_noise(make_time_grid(1.0, 8), 1, u.reference_correlation(), 1 << 14, 1);
  BsdeOptions opts;
  opts.exec = policy(state);
  const BasisSpec basis = BasisSpec::full(1, 5, u.x0);
  for (auto _ : state) {
    auto sol = backward_sweep(u, batch, basis, opts);
    benchmark::DoNotOptimize(sol);
  }
  label(state);
}

void BM_LowerBound(benchmark::State& state) {
  const UvmSpec u = call_spread();
  const auto ref = sample_noise(make_time_grid(1.0, 4), 1, u.reference_correlation(), 1 << 13, 1);
  const auto sol = backward_sweep(u, ref, BasisSpec::full(1, 5, u.x0));
  const auto feedback = uvm_feedback(u, sol);
  const auto batch = sample_noise(make_time_grid(1.0, 100), 1, u.reference_correlation(), 1 << 13, 2);
  const ModelSpec model = u.model();
  for (auto _ : state) {
    auto e = lower_bound(model, feedback, batch, policy(state));
    benchmark::DoNotOptimize(e);
  }
  label(state);
}

void BM_DualUpperBound(benchmark::State& state) {
  const UvmSpec u = call_spread();
  const auto ref = sample_noise(make_time_grid(1.0, 2), 1, u.reference_correlation(), 1 << 13, 1);
  const auto sol = backward_sweep(u, ref, BasisSpec::full(1, 5, u.x0));
  const auto feedback = uvm_feedback(u, sol);
  const auto batch = sample_noise(make_time_grid(1.0, 2), 1, u.reference_correlation(), 1 << 11, 2);
  const ModelSpec model = u.model();
  for (auto _ : state) {
    auto e = dual_upper_bound(model, uvm_phi(sol), batch, SearchOptions{}, &feedback, policy(state));
    benchmark::DoNotOptimize(e);
  }
  label(state);
}

void BM_CvaDual(benchmark::State& state) {
  CvaSpec spec;
  spec.intensity = 0.7;
  const auto grid = make_time_grid(1.0, 50);
  for (auto _ : state) {
    auto e = cva_dual(spec, grid, 1 << 13, 1, policy(state));
    benchmark::DoNotOptimize(e);
  }
  label(state);
}

}  // namespace

BENCHMARK(BM_SampleNoise)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BackwardSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LowerBound)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DualUpperBound)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CvaDual)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
