#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "svla/config.hpp"
#include "svla/efficiency.hpp"
#include "svla/train.hpp"

namespace svla {

// Command implementations behind the `svla` CLI. Each writes byte-stable
// outputs for a fixed (config, seed) pair; bench timing columns are the one
// documented exception.

std::vector<Episode> synthesize_episodes(const SceneSpec& spec, std::uint64_t seed, int count,
                                         std::uint64_t stream_tag);

void cmd_gen_data(const RunConfig& cfg, const std::string& out_path, int count,
                  std::ostream& log);

struct TrainOutputs {
  std::string checkpoint_path;
  std::string metrics_path;
  TrainResult result;
};
TrainOutputs cmd_train(const RunConfig& cfg, const std::string& data_path,
                       const std::string& out_dir, std::ostream& log);

EvalMetrics cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
                     const std::string& out_path, std::ostream& log);

void cmd_bench(const RunConfig& cfg, const std::string& out_path, std::ostream& log);

struct AblateRow {
  int ratio = 0;
  int tokens = 0;
  std::uint64_t flops = 0;
  double eval_mse = 0.0;
  double recall = 0.0;
  std::string status;  // "ok" or "error: ..."
};
std::vector<AblateRow> cmd_ablate(const RunConfig& cfg, const std::vector<int>& ratios,
                                  const std::string& out_path, std::ostream& log);

void cmd_dump_attn(const std::string& checkpoint_path, std::uint64_t episode_seed,
                   const std::string& out_dir, std::ostream& log);

// Full argv entry point; returns the process exit code (0 ok, 1 usage,
// 2 runtime failure).
int run_cli(int argc, const char* const* argv);

}  // namespace svla
