#include "svla/train.hpp"

#include <cmath>
#include <stdexcept>

namespace svla {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr double kWarmupFraction = 0.05;
constexpr double kFloorFraction = 0.02;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

Adam::Adam(const std::vector<ParamEntry>& params) : params_(params) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const ParamEntry& e : params) {
    m_.emplace_back(e.var->value.rows(), e.var->value.cols());
    v_.emplace_back(e.var->value.rows(), e.var->value.cols());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, t_);
  const double bc2 = 1.0 - std::pow(kBeta2, t_);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Node& node = *params_[p].var;
    if (node.grad.empty()) {
      continue;
    }
    std::vector<double>& val = node.value.vec();
    const std::vector<double>& grad = node.grad.vec();
    std::vector<double>& m = m_[p].vec();
    std::vector<double>& v = v_[p].vec();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double g = grad[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

double lr_schedule(double base_lr, int step, int total_steps) {
  const int warmup = std::max(1, static_cast<int>(std::lround(kWarmupFraction * total_steps)));
  if (step <= warmup) {
    return base_lr * static_cast<double>(step) / warmup;
  }
  const double floor = kFloorFraction * base_lr;
  const double progress =
      static_cast<double>(step - warmup) / std::max(1, total_steps - warmup);
  return floor + 0.5 * (base_lr - floor) * (1.0 + std::cos(kPi * progress));
}

EvalMetrics evaluate(const Model& model, const std::vector<Episode>& episodes) {
  if (episodes.empty()) {
    throw std::invalid_argument("evaluate: empty episode set");
  }
  EvalMetrics out;
  for (const Episode& ep : episodes) {
    const ForwardResult fr = model.forward(ep);
    out.mse += val(fr.loss).item();
    out.recall += selection_recall(fr, ep);
    out.success += success_proxy(fr.pred_chunk, ep) ? 1.0 : 0.0;
  }
  const double inv = 1.0 / static_cast<double>(episodes.size());
  out.mse *= inv;
  out.recall *= inv;
  out.success *= inv;
  return out;
}

TrainResult train_model(Model& model, const std::vector<Episode>& train_set,
                        const std::vector<Episode>& eval_set, const TrainOptions& options,
                        const CheckpointSink& on_checkpoint) {
  if (train_set.empty()) {
    throw std::invalid_argument("train_model: empty training set");
  }
  if (options.batch_size < 1 || options.steps < 0) {
    throw std::invalid_argument("train_model: batch_size must be >= 1 and steps >= 0");
  }

  Adam opt(model.params().entries());
  Rng batch_rng(Rng::derive(options.seed, 0x545241494eULL));
  TrainResult result;

  auto emit = [&](int step) {
    const EvalMetrics train_m = evaluate(model, train_set);
    const EvalMetrics eval_m = evaluate(model, eval_set.empty() ? train_set : eval_set);
    MetricsRow row;
    row.step = step;
    row.train_mse = train_m.mse;
    row.eval_mse = eval_m.mse;
    row.recall = eval_m.recall;
    row.success = eval_m.success;
    row.tokens = options.tokens_metric;
    row.flops = options.flops_metric;
    result.rows.push_back(row);
    if (on_checkpoint) {
      on_checkpoint(model, step);
    }
  };

  if (options.steps == 0) {
    emit(0);
    return result;
  }

  const double inv_batch = 1.0 / options.batch_size;
  for (int step = 1; step <= options.steps; ++step) {
    model.params().zero_grads();
    double batch_loss = 0.0;
    for (int b = 0; b < options.batch_size; ++b) {
      const Episode& ep = train_set[batch_rng.below(train_set.size())];
      const ForwardResult fr = model.forward(ep);
      batch_loss += val(fr.loss).item();
      backward(scale(fr.loss, inv_batch));
    }
    batch_loss *= inv_batch;
    if (!std::isfinite(batch_loss)) {
      result.aborted_non_finite = true;
      result.final_step = step - 1;
      return result;
    }
    opt.step(lr_schedule(options.learning_rate, step, options.steps));
    if (step % options.eval_interval == 0 || step == options.steps) {
      emit(step);
    }
  }
  result.final_step = options.steps;
  return result;
}

}  // namespace svla
