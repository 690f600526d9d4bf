#include <benchmark/benchmark.h>

#include "degenheat/model_kernel.hpp"
#include "degenheat/oracles.hpp"
#include "degenheat/specfun.hpp"
#include "degenheat/wf_solver.hpp"

using namespace degenheat;

static void BM_Psi(benchmark::State& state) {
  const double z = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(specfun::psi(1.7, z).value);
}
BENCHMARK(BM_Psi)->Arg(1)->Arg(40)->Arg(5000);

static void BM_KernelRule(benchmark::State& state) {
  const double t = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model::kernel_rule(1.3, t, 0.4).w.data());
}
BENCHMARK(BM_KernelRule)->Arg(10)->Arg(1000);

static void BM_StepBuild(benchmark::State& state) {
  const auto d = wf::DriftSpec::mutation(1.0, 2.0);
  for (auto _ : state) {
    wf::StepOperator step(d, 9.765625e-5, static_cast<int>(state.range(0)), {});
    benchmark::DoNotOptimize(step.matrix().data());
  }
}
BENCHMARK(BM_StepBuild)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_SolveBackwardCached(benchmark::State& state) {
  const auto d = wf::DriftSpec::mutation(1.0, 2.0);
  const auto grid = numerics::uniform_grid(0, 1, 101, numerics::Domain::unit());
  wf::solve_backward(d, [](double x) { return x * x; }, 0.1, grid);
  for (auto _ : state) benchmark::DoNotOptimize(wf::solve_backward(d, [](double x) { return x * x; }, 0.1, grid).values.data());
}
BENCHMARK(BM_SolveBackwardCached)->Unit(benchmark::kMillisecond);

static void BM_WrightFisherChain(benchmark::State& state) {
  auto p = oracles::chain_for_diffusion(2, 3, 0, state.range(0), 0.05, 0.3, 1000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(oracles::mc_wright_fisher(p).counts.data());
  state.SetItemsProcessed(state.iterations() * p.replicates * p.generations);
}
BENCHMARK(BM_WrightFisherChain)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
