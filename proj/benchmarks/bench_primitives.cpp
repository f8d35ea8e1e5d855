#include <benchmark/benchmark.h>

#include "svla/nn.hpp"
#include "svla/rng.hpp"

namespace {

using namespace svla;

Tensor rand_tensor(int rows, int cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.vec()) {
    v = rng.uniform(-1.0, 1.0);
  }
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Var a = make_constant(rand_tensor(n, n, rng));
  Var b = make_constant(rand_tensor(n, n, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_Attention(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const int d = 32;
  Rng rng(2);
  ParamRegistry reg;
  AttentionParams p = make_attention_params(reg, "attn", d, rng);
  Var x = make_constant(rand_tensor(s, d, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(multi_head_attention(x, p, 4));
  }
}
BENCHMARK(BM_Attention)->Arg(16)->Arg(64)->Arg(128);

void BM_AttentionBackward(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const int d = 32;
  Rng rng(3);
  ParamRegistry reg;
  AttentionParams p = make_attention_params(reg, "attn", d, rng);
  Var x = make_constant(rand_tensor(s, d, rng));
  for (auto _ : state) {
    reg.zero_grads();
    backward(mean_all(multi_head_attention(x, p, 4)));
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
