#include <benchmark/benchmark.h>

#include "svla/config.hpp"
#include "svla/harness.hpp"

namespace {

using namespace svla;

// Full forward latency of the default sparsified pipeline vs. the unpruned
// conventional baseline.
void BM_ForwardSparsified(benchmark::State& state) {
  RunConfig cfg;
  Model model(cfg.pipeline());
  const Episode ep = generate_episode(7, cfg.scene());
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(ep));
  }
}
BENCHMARK(BM_ForwardSparsified);

void BM_ForwardDenseBaseline(benchmark::State& state) {
  RunConfig cfg;
  cfg.sparsify = false;
  cfg.mode = "conventional";
  Model model(cfg.pipeline());
  const Episode ep = generate_episode(7, cfg.scene());
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(ep));
  }
}
BENCHMARK(BM_ForwardDenseBaseline);

void BM_TrainStep(benchmark::State& state) {
  RunConfig cfg;
  Model model(cfg.pipeline());
  const Episode ep = generate_episode(9, cfg.scene());
  for (auto _ : state) {
    model.params().zero_grads();
    const ForwardResult fr = model.forward(ep);
    backward(fr.loss);
    benchmark::DoNotOptimize(fr.pred_chunk);
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
