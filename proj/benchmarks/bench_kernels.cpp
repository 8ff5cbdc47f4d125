#include <benchmark/benchmark.h>

#include "composer/attention.hpp"
#include "composer/compose.hpp"
#include "composer/rng.hpp"
#include "composer/tensor.hpp"

using namespace composer;

namespace {

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  const Tensor a = rng.normal_tensor({n, n});
  const Tensor b = rng.normal_tensor({n, n});
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_ScaledDotAttention(benchmark::State& state) {
  const int tokens = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  Rng rng(2);
  const Tensor q = rng.normal_tensor({tokens, d});
  const Tensor k = rng.normal_tensor({tokens, d});
  const Tensor v = rng.normal_tensor({tokens, d});
  for (auto _ : state) {
    benchmark::DoNotOptimize(scaled_dot_attention(q, k, v));
  }
}
BENCHMARK(BM_ScaledDotAttention)->Args({48, 32})->Args({192, 8})->Args({768, 8});

void BM_FeatureInjection(benchmark::State& state) {
  const int tokens = static_cast<int>(state.range(0));
  const int d = 8;
  Rng rng(3);
  const Tensor q = rng.normal_tensor({tokens, d});
  const KVPair den{rng.normal_tensor({tokens, d}), rng.normal_tensor({tokens, d}), 1};
  const KVPair ref{rng.normal_tensor({tokens, d}), rng.normal_tensor({tokens, d}), 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(feature_injection_attention(q, den, ref));
  }
}
BENCHMARK(BM_FeatureInjection)->Arg(48)->Arg(192);

void BM_TokenSelection(benchmark::State& state) {
  std::vector<AssetImage> assets;
  assets.push_back(generate_asset(Category::kUpper, PatternKind::kStripes, 0.2f, 16, 16, 0));
  assets.push_back(generate_asset(Category::kLower, PatternKind::kChecker, 0.3f, 20, 12, 0));
  const AssetComposition comp = compose_assets(assets, 64, 48, 7);
  const std::vector<BlockDims> blocks = {{1, 32, 24}, {2, 16, 12}, {3, 8, 6}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(token_selection(comp, blocks));
  }
}
BENCHMARK(BM_TokenSelection);

}  // namespace
