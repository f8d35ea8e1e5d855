#pragma once

#include <string>
#include <vector>

#include "svla/model.hpp"

namespace svla {

// Flat "key = value" run configuration. Parsing is strict: unknown or
// duplicate keys are errors, and parse(serialize(parse(text))) is the
// identity.
struct RunConfig {
  std::uint64_t seed = 42;

  // scene
  int grid_side = 8;
  int num_objects = 3;
  int vocab_size = 64;
  int instr_len = 8;
  int chunk_len = 8;
  double noise_std = 0.1;

  // sparsification
  bool sparsify = true;
  int ratio = 8;
  int cue_k = 5;
  int anchor_h = 3;
  int agg_tokens = 3;
  int agg_rounds = 1;
  bool agg_learnable = false;
  bool dense_fusion = true;

  // encoders
  int tower_blocks = 12;
  int tower_width = 32;
  int tower_heads = 4;
  std::vector<int> hook_depths = {2, 6, 10};
  int instr_blocks = 2;

  // decoder
  int decoder_layers = 2;
  int decoder_width = 64;
  int decoder_heads = 4;
  std::string mode = "coupled";
  int arms = 1;

  // training
  double learning_rate = 0.003;
  int steps = 2000;
  int batch_size = 8;
  int eval_interval = 400;
  int eval_episodes = 64;
  int dataset_count = 512;

  // bench / ablation
  int bench_reps = 30;
  int bench_warmup = 3;
  int ablate_workers = 0;  // 0 = one per ratio up to hardware threads

  // paths
  std::string data;
  std::string eval_data;
  std::string out;

  static RunConfig parse(const std::string& text);
  static RunConfig load_file(const std::string& path);
  void set_key(const std::string& key, const std::string& value);
  std::string serialize() const;

  SceneSpec scene() const;
  PipelineConfig pipeline() const;
  void validate() const { pipeline().validate(); }
};

// Shortest round-trip decimal rendering (used by every CSV/config writer so
// outputs are byte-stable).
std::string format_double(double v);

}  // namespace svla
