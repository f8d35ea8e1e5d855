#include "svla/efficiency.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace svla {

std::uint64_t transformer_flops(std::uint64_t seq_len, std::uint64_t width, std::uint64_t layers,
                                std::uint64_t mlp_ratio) {
  const std::uint64_t proj = 8 * seq_len * width * width;
  const std::uint64_t attn = 4 * seq_len * seq_len * width;
  const std::uint64_t mlp = 4 * mlp_ratio * seq_len * width * width;
  return layers * (proj + attn + mlp);
}

TokenBudget token_budget(int n, int ratio, int cue_k, int m, int chunk_len, int arms,
                         ActionMode mode) {
  if (n < 1 || ratio < 1 || n % ratio != 0) {
    throw std::invalid_argument("token_budget: N = " + std::to_string(n) +
                                " not divisible by ratio " + std::to_string(ratio));
  }
  TokenBudget b;
  b.visual_in = n;
  b.visual_out = n / ratio;
  if (ratio > 1 && (cue_k < 1 || cue_k >= b.visual_out)) {
    throw std::invalid_argument("token_budget: cue_k = " + std::to_string(cue_k) +
                                " leaves no anchor budget in |Z| = " +
                                std::to_string(b.visual_out));
  }
  b.action_tokens_per_step = tokens_per_step(mode);
  b.action_tokens_per_chunk = static_cast<int>(coupler_token_count(chunk_len, arms, mode));
  b.instruction = m;
  b.decoder_seq = b.visual_out + 1 + m + b.action_tokens_per_chunk;
  return b;
}

std::vector<StageFlops> pipeline_flops(const PipelineConfig& cfg) {
  const auto n = static_cast<std::uint64_t>(cfg.scene.num_patches());
  const auto m = static_cast<std::uint64_t>(cfg.scene.instr_len);
  const auto tower_w = static_cast<std::uint64_t>(cfg.tower.width);
  const auto tower_l = static_cast<std::uint64_t>(cfg.tower.blocks);
  const std::uint64_t spa_seq = n + (cfg.sparsify ? cfg.agg_tokens : 0);

  const TokenBudget budget =
      token_budget(cfg.scene.num_patches(), cfg.sparsify ? cfg.ratio : 1, cfg.cue_k,
                   cfg.scene.instr_len, cfg.scene.chunk_len, cfg.decoder.arms, cfg.decoder.mode);

  std::vector<StageFlops> stages;
  stages.push_back({"tower.sem", n, tower_w, tower_l, transformer_flops(n, tower_w, tower_l)});
  stages.push_back(
      {"tower.spa", spa_seq, tower_w, tower_l, transformer_flops(spa_seq, tower_w, tower_l)});
  stages.push_back({"instr", m, tower_w, static_cast<std::uint64_t>(cfg.instr_blocks),
                    transformer_flops(m, tower_w, cfg.instr_blocks)});
  const auto dec_seq = static_cast<std::uint64_t>(budget.decoder_seq);
  const auto dec_w = static_cast<std::uint64_t>(cfg.decoder.width);
  const auto dec_l = static_cast<std::uint64_t>(cfg.decoder.layers);
  stages.push_back({"decoder", dec_seq, dec_w, dec_l, transformer_flops(dec_seq, dec_w, dec_l)});
  return stages;
}

std::uint64_t total_flops(const std::vector<StageFlops>& stages) {
  std::uint64_t total = 0;
  for (const StageFlops& s : stages) {
    total += s.flops;
  }
  return total;
}

std::uint64_t decoder_stage_flops(const PipelineConfig& cfg) {
  for (const StageFlops& s : pipeline_flops(cfg)) {
    if (s.stage == "decoder") {
      return s.flops;
    }
  }
  return 0;
}

BenchStats bench_callable(const std::function<void()>& fn, int reps, int warmup) {
  if (reps < 5) {
    throw std::invalid_argument("bench_callable: need at least 5 repetitions, got " +
                                std::to_string(reps));
  }
  for (int i = 0; i < warmup; ++i) {
    fn();
  }
  std::vector<double> times(reps);
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times[i] = std::chrono::duration<double>(t1 - t0).count();
  }
  std::sort(times.begin(), times.end());
  BenchStats stats;
  stats.reps = reps;
  stats.min_s = times.front();
  stats.median_s = times[reps / 2];
  stats.p95_s = times[std::min(reps - 1, (reps * 95) / 100)];
  return stats;
}

double actions_per_second(const BenchStats& stats, int chunk_len, int arms) {
  return static_cast<double>(chunk_len) * arms / stats.median_s;
}

}  // namespace svla
