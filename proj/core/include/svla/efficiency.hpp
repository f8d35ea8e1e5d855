#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "svla/model.hpp"

namespace svla {

// Analytic transformer compute, multiply-accumulate = 2 FLOPs, softmax and
// norm costs ignored. Per layer: 8*s*d^2 (QKV + output projections) +
// 4*s^2*d (scores + weighted sum) + 4*r*s*d^2 (the two MLP matmuls).
std::uint64_t transformer_flops(std::uint64_t seq_len, std::uint64_t width, std::uint64_t layers,
                                std::uint64_t mlp_ratio = 4);

struct TokenBudget {
  int visual_in = 0;               // N
  int visual_out = 0;              // |Z| = N / R (R = 1 means unpruned)
  int action_tokens_per_step = 0;  // 7 / 3 / 1 by mode
  int action_tokens_per_chunk = 0;
  int instruction = 0;  // M
  int decoder_seq = 0;  // |Z| + 1 + M + per-step * K * arms
};

// ratio must divide n; cue_k is validated against the retained budget for
// sparsified (ratio > 1) configs.
TokenBudget token_budget(int n, int ratio, int cue_k, int m, int chunk_len, int arms,
                         ActionMode mode);

struct StageFlops {
  std::string stage;
  std::uint64_t seq_len = 0;
  std::uint64_t width = 0;
  std::uint64_t layers = 0;
  std::uint64_t flops = 0;
};

// Stages: both towers (spatial counted at N + A when sparsified), the
// instruction encoder, and the decoder.
std::vector<StageFlops> pipeline_flops(const PipelineConfig& cfg);
std::uint64_t total_flops(const std::vector<StageFlops>& stages);
std::uint64_t decoder_stage_flops(const PipelineConfig& cfg);

struct BenchStats {
  double median_s = 0.0;
  double p95_s = 0.0;
  double min_s = 0.0;
  int reps = 0;
};

// Runs fn warmup times unrecorded, then reps times recorded. reps must be
// >= 5. Single-threaded; one measurement per call.
BenchStats bench_callable(const std::function<void()>& fn, int reps, int warmup = 3);

// actions predicted per second at the measured median.
double actions_per_second(const BenchStats& stats, int chunk_len, int arms);

}  // namespace svla
