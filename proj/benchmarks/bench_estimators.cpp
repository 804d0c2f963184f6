#include <benchmark/benchmark.h>

#include "gpi/dml.hpp"
#include "gpi/simulate.hpp"

using namespace gpi;

static void ClusteredSe(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<double> scores(n);
  std::vector<int> cluster(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.normal();
    cluster[i] = static_cast<int>(i % (n / 10));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(clustered_se(scores, cluster));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(ClusteredSe)->Arg(1000)->Arg(10000)->Arg(100000);

static void GenerateDgpA(benchmark::State& state) {
  DgpSpec spec;
  spec.n = static_cast<std::size_t>(state.range(0));
  spec.d_r = 16;
  spec.seed = 1;
  for (auto _ : state) {
    const GeneratedCausal gen = generate_causal(spec);
    benchmark::DoNotOptimize(gen.ds.y.data());
  }
}
BENCHMARK(GenerateDgpA)->Arg(1000)->Arg(4000);

static void AttWithOracleNuisances(benchmark::State& state) {
  DgpSpec spec;
  spec.n = static_cast<std::size_t>(state.range(0));
  spec.d_r = 16;
  spec.seed = 1;
  const GeneratedCausal gen = generate_causal(spec);
  const NuisanceEstimates oracle = oracle_nuisances(spec, gen.ds);
  for (auto _ : state) {
    const EffectEstimate e = estimate_att(gen.ds, oracle, 0.01);
    benchmark::DoNotOptimize(e.point);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(AttWithOracleNuisances)->Arg(4000)->Arg(20000);
