#include <benchmark/benchmark.h>

#include "slimmatch/bench.hpp"
#include "slimmatch/matching.hpp"
#include "slimmatch/ops.hpp"
#include "slimmatch/rng.hpp"

using namespace slimmatch;

namespace {

void attention(benchmark::State& state, AttentionKind kind) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const AttentionWorkload w = AttentionWorkload::make(kind, n, 64);
  for (auto _ : state) benchmark::DoNotOptimize(w.run());
  state.SetComplexityN(state.range(0));
}

void vector_attention_bench(benchmark::State& state) { attention(state, AttentionKind::vector); }
void vanilla_attention_bench(benchmark::State& state) { attention(state, AttentionKind::vanilla); }

void dual_softmax_bench(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> v(n * n);
  for (double& x : v) x = rng.normal();
  const Tensor s = Tensor::from_data({n, n}, v);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(dual_softmax(s));
}

}  // namespace

BENCHMARK(vector_attention_bench)->RangeMultiplier(2)->Range(256, 4096)->Complexity(benchmark::oN);
BENCHMARK(vanilla_attention_bench)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);
BENCHMARK(dual_softmax_bench)->Arg(64)->Arg(256);
BENCHMARK_MAIN();
