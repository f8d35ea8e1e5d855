#pragma once

#include <functional>
#include <vector>

#include "svla/model.hpp"

namespace svla {

// Adaptive-moment optimizer (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with
// bias correction. step() consumes the grads currently accumulated on the
// registered parameters.
class Adam {
 public:
  explicit Adam(const std::vector<ParamEntry>& params);
  void step(double lr);

 private:
  std::vector<ParamEntry> params_;
  std::vector<Tensor> m_, v_;
  int t_ = 0;
};

// Linear warm-up over the first 5% of steps, then cosine decay to 2% of the
// base rate. step is 1-based.
double lr_schedule(double base_lr, int step, int total_steps);

struct TrainOptions {
  int steps = 2000;
  int batch_size = 8;
  double learning_rate = 0.003;
  int eval_interval = 400;
  std::uint64_t seed = 42;
  std::int64_t tokens_metric = 0;   // echoed into every metrics row
  std::uint64_t flops_metric = 0;  // echoed into every metrics row
};

struct MetricsRow {
  int step = 0;
  double train_mse = 0.0;
  double eval_mse = 0.0;
  double recall = 0.0;
  double success = 0.0;
  std::int64_t tokens = 0;
  std::uint64_t flops = 0;
};

struct EvalMetrics {
  double mse = 0.0;
  double recall = 0.0;
  double success = 0.0;
};

EvalMetrics evaluate(const Model& model, const std::vector<Episode>& episodes);

struct TrainResult {
  std::vector<MetricsRow> rows;
  int final_step = 0;
  bool aborted_non_finite = false;
};

using CheckpointSink = std::function<void(const Model&, int step)>;

// Deterministic given (options.seed, model seed, datasets). Metrics rows and
// a checkpoint are emitted at every eval_interval boundary and at the end;
// a non-finite batch loss stops training before the parameter update so the
// last written checkpoint stays good.
TrainResult train_model(Model& model, const std::vector<Episode>& train_set,
                        const std::vector<Episode>& eval_set, const TrainOptions& options,
                        const CheckpointSink& on_checkpoint = nullptr);

}  // namespace svla
