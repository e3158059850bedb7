// Assignment-solver microbenchmarks.
#include <benchmark/benchmark.h>

#include "setdet/matching.hpp"
#include "setdet/rng.hpp"

namespace {

setdet::CostMatrix random_cost(setdet::Rng& rng, int n, int m) {
    setdet::CostMatrix c;
    c.n_preds = n;
    c.n_gts = m;
    c.values.resize(static_cast<size_t>(n) * m);
    for (double& v : c.values) v = rng.uniform(-2.0, 2.0);
    return c;
}

void BM_HungarianSquare(benchmark::State& state) {
    setdet::Rng rng(7);
    const int n = static_cast<int>(state.range(0));
    const auto c = random_cost(rng, n, n);
    for (auto _ : state) {
        auto a = setdet::hungarian_assign(c);
        benchmark::DoNotOptimize(a);
    }
    state.SetComplexityN(n);
}

void BM_HungarianTrainingShape(benchmark::State& state) {
    // the shape the training loop produces: N queries vs up to Kmax GTs
    setdet::Rng rng(8);
    const auto c = random_cost(rng, 16, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto a = setdet::hungarian_assign(c);
        benchmark::DoNotOptimize(a);
    }
}

void BM_BruteForce(benchmark::State& state) {
    setdet::Rng rng(9);
    const int n = static_cast<int>(state.range(0));
    const auto c = random_cost(rng, n, n);
    for (auto _ : state) {
        auto a = setdet::brute_force_assign(c);
        benchmark::DoNotOptimize(a);
    }
}

}  // namespace

BENCHMARK(BM_HungarianSquare)->RangeMultiplier(2)->Range(8, 64)->Complexity();
BENCHMARK(BM_HungarianTrainingShape)->DenseRange(1, 5);
BENCHMARK(BM_BruteForce)->DenseRange(4, 7);

BENCHMARK_MAIN();
