#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "svla/nn.hpp"
#include "svla/scene.hpp"

namespace svla {

struct TowerConfig {
  int blocks = 12;
  int width = 32;
  int heads = 4;
  std::vector<int> hook_depths = {2, 6, 10};  // block indices exposed to the dense fuser

  void validate() const;
};

struct FeatureStack {
  std::vector<std::pair<int, Var>> per_hook;  // (depth, tokens) in hook order
  Var final;
};

// Called with the tokens after hook-depth blocks; the returned injection (if
// non-null) is added residually before the next block.
using HookCallback = std::function<Var(int depth, const Var& tokens)>;

// One toy encoder tower: learned type-code table + fixed 2-D sinusoidal
// positions + per-episode Gaussian noise, then `blocks` pre-norm transformer
// blocks with fusion hooks.
class Tower {
 public:
  Tower(ParamRegistry& reg, const std::string& prefix, const TowerConfig& cfg, int grid_side,
        std::uint64_t noise_salt, Rng& init_rng);

  // type-code table lookup + position encoding + noise(ep.seed ^ salt).
  Var embed_patches(const Episode& ep, double noise_std) const;
  FeatureStack forward(const Var& patches, const HookCallback& hook = nullptr) const;
  // Single block step, for callers that run two towers in lockstep.
  Var block_forward(const Var& x, int block) const;

  const TowerConfig& config() const { return cfg_; }
  const Var& type_table() const { return type_table_; }

 private:
  TowerConfig cfg_;
  int grid_side_;
  std::uint64_t noise_salt_;
  Var type_table_;  // (kMaxObjectTypes + 1) x width
  Tensor pos_enc_;  // N x width, fixed
  std::vector<TransformerBlock> blocks_;
};

struct InstructionEmbedding {
  Var tokens;  // M x width
  Var pooled;  // 1 x pooled_width
};

// Token table + 1-D positions + two transformer blocks; pooled output is the
// row mean passed through a learned projection (no noise on the text path).
class InstructionEncoder {
 public:
  InstructionEncoder(ParamRegistry& reg, const std::string& prefix, int vocab_size, int width,
                     int heads, int blocks, int pooled_width, Rng& init_rng);

  InstructionEmbedding embed(const std::vector<std::uint32_t>& token_ids) const;

  int width() const { return width_; }

 private:
  int vocab_size_;
  int width_;
  Var token_table_;
  Tensor pos_enc_;
  std::vector<TransformerBlock> blocks_;
  Var pool_w_, pool_b_;
};

}  // namespace svla
