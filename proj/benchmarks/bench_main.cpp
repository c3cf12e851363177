#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "rwre/elliptic.hpp"
#include "rwre/percolation.hpp"
#include "rwre/regeneration.hpp"
#include "rwre/stationary.hpp"
#include "rwre/walk.hpp"

using namespace rwre;

static void BM_SimulateIid(benchmark::State& state) {
  const ModelEnvironment env(EnvironmentModel::dirichlet(static_cast<int>(state.range(0)), 0.1, 1));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(simulate(env, origin(), 100000, rng).end());
  }
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_SimulateIid)->Arg(2)->Arg(3);

static void BM_SimulateWithCoins(benchmark::State& state) {
  PerturbationParams pp;
  pp.lambda = 0.5;
  const PerturbedEnvironment env(std::make_shared<ModelEnvironment>(EnvironmentModel::simple(2)), pp);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed);
    benchmark::DoNotOptimize(simulate_with_coins(env, 0.1, origin(), 100000, rng, seed + 1).end());
    ++seed;
  }
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_SimulateWithCoins);

static void BM_SolvePhi(benchmark::State& state) {
  const auto env = periodize(EnvironmentModel::dirichlet(2, 0.1, 3), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_phi(env).residual);
}
BENCHMARK(BM_SolvePhi)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_ContactSet(benchmark::State& state) {
  const Domain E = Domain::cube(2, origin(), state.range(0));
  Rng rng(4);
  std::vector<double> u(E.closure().size());
  for (double& v : u) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(contact_set(E, u).count());
}
BENCHMARK(BM_ContactSet)->Arg(4)->Arg(8);

static void BM_MaxPrincipleInstance(benchmark::State& state) {
  const auto model = EnvironmentModel::dirichlet(2, 0.1, 0);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(max_principle_instance(model, 8, false, seed++).report.ratio);
}
BENCHMARK(BM_MaxPrincipleInstance);

static void BM_EstimateQn(benchmark::State& state) {
  const auto model = EnvironmentModel::trap(2, 0.05, 0.05, 0.01, 0.2, 0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_qn(model, 0.02, {1, 2, 4, 8}, 10000, 5).phi);
}
BENCHMARK(BM_EstimateQn);

static void BM_SlabLaws(benchmark::State& state) {
  PerturbationParams pp;
  pp.lambda = 0.1;
  const PerturbedEnvironment env(std::make_shared<ModelEnvironment>(EnvironmentModel::simple(2)), pp);
  for (auto _ : state) benchmark::DoNotOptimize(min_ratio(slab_hitting_distributions(env, origin(), 10, SlabOptions{})));
}
BENCHMARK(BM_SlabLaws)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
