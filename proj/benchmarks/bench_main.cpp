#include <benchmark/benchmark.h>

#include "areuredi/bench.hpp"
#include "areuredi/oracle.hpp"
#include "areuredi/redi.hpp"
#include "areuredi/sampler.hpp"

using namespace areuredi;

namespace {

void BM_FitExactDenoiser(benchmark::State& state) {
  const auto inst = random_instance(3, static_cast<int>(state.range(0)), 2, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_exact_denoiser(inst.coupling, PathSchedule::linear(), 8));
  }
}
BENCHMARK(BM_FitExactDenoiser)->Arg(3)->Arg(4)->Arg(5);

void BM_ExactKernel(benchmark::State& state) {
  const auto inst = random_instance(3, static_cast<int>(state.range(0)), 2, 1);
  const BaseModel model(inst.coupling, fit_exact_denoiser(inst.coupling, PathSchedule::linear(), 1));
  KernelSpec spec;
  spec.eta = 5.0;
  spec.weights = WeightVector({0.5, 0.5});
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_kernel(model, inst.objectives, spec));
  }
}
BENCHMARK(BM_ExactKernel)->Arg(3)->Arg(4);

void BM_ConditionalTcExact(benchmark::State& state) {
  Rng rng(3, 0);
  const auto c = random_coupling(StateSpace(2, static_cast<int>(state.range(0))), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conditional_tc_exact(c, PathSchedule::linear(), 0.25, 0.75));
  }
}
BENCHMARK(BM_ConditionalTcExact)->Arg(3)->Arg(5);

void BM_RunChain(benchmark::State& state) {
  const auto task = suite_task(state.range(0) == 0 ? "lotz8" : "tri10");
  const auto model = task_model(task);
  const auto objs = task.objective_set();
  SamplerConfig cfg;
  cfg.anneal = {1.0, 20.0, task.steps};
  cfg.weights = task.weights();
  cfg.density = task_density(task);
  std::uint64_t stream = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_chain(cfg, model, objs, std::nullopt, stream++));
  }
  state.SetItemsProcessed(state.iterations() * task.steps);
}
BENCHMARK(BM_RunChain)->Arg(0)->Arg(1);

void BM_ParetoFront(benchmark::State& state) {
  const auto task = suite_task("lotz16");
  const auto objs = task.objective_set();
  for (auto _ : state) {
    benchmark::DoNotOptimize(pareto_front(objs, task.space()));
  }
}
BENCHMARK(BM_ParetoFront);

void BM_Hypervolume3d(benchmark::State& state) {
  Rng rng(5, 0);
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {rng.uniform(), rng.uniform(), rng.uniform()};
  for (auto _ : state) {
    benchmark::DoNotOptimize(hypervolume(pts));
  }
}
BENCHMARK(BM_Hypervolume3d)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
