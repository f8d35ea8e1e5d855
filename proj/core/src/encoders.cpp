#include "svla/encoders.hpp"

#include <stdexcept>

namespace svla {

void TowerConfig::validate() const {
  if (blocks < 1) {
    throw std::invalid_argument("TowerConfig: blocks must be >= 1");
  }
  if (width < 2 || heads < 1 || width % heads != 0) {
    throw std::invalid_argument("TowerConfig: width " + std::to_string(width) +
                                " not divisible by heads " + std::to_string(heads));
  }
  for (std::size_t i = 0; i < hook_depths.size(); ++i) {
    if (hook_depths[i] < 0 || hook_depths[i] >= blocks) {
      throw std::invalid_argument("TowerConfig: hook depth " + std::to_string(hook_depths[i]) +
                                  " outside [0, " + std::to_string(blocks) + ")");
    }
    if (i > 0 && hook_depths[i] <= hook_depths[i - 1]) {
      throw std::invalid_argument("TowerConfig: hook_depths must be strictly increasing");
    }
  }
}

Tower::Tower(ParamRegistry& reg, const std::string& prefix, const TowerConfig& cfg, int grid_side,
             std::uint64_t noise_salt, Rng& init_rng)
    : cfg_(cfg), grid_side_(grid_side), noise_salt_(noise_salt) {
  cfg_.validate();
  type_table_ = init_weight(reg, prefix + ".type_table", kMaxObjectTypes + 1, cfg.width, init_rng);
  pos_enc_ = sinusoid_encoding_2d(grid_side, cfg.width);
  blocks_.reserve(cfg.blocks);
  for (int b = 0; b < cfg.blocks; ++b) {
    blocks_.push_back(
        TransformerBlock::make(reg, prefix + ".block" + std::to_string(b), cfg.width, cfg.heads,
                               init_rng));
  }
}

Var Tower::embed_patches(const Episode& ep, double noise_std) const {
  const int n = grid_side_ * grid_side_;
  if (static_cast<int>(ep.patch_types.size()) != n) {
    throw std::invalid_argument("embed_patches: episode has " +
                                std::to_string(ep.patch_types.size()) + " patches, tower expects " +
                                std::to_string(n));
  }
  std::vector<int> rows(n);
  for (int i = 0; i < n; ++i) {
    if (ep.patch_types[i] > kMaxObjectTypes) {
      throw std::invalid_argument("embed_patches: type code " +
                                  std::to_string(ep.patch_types[i]) + " exceeds table size " +
                                  std::to_string(kMaxObjectTypes + 1));
    }
    rows[i] = static_cast<int>(ep.patch_types[i]);
  }

  Tensor extra = pos_enc_;
  if (noise_std > 0.0) {
    Rng noise_rng(ep.seed ^ noise_salt_);
    for (double& v : extra.vec()) {
      v += noise_rng.gaussian(0.0, noise_std);
    }
  }
  return add(gather_rows(type_table_, std::move(rows)), make_constant(std::move(extra)));
}

Var Tower::block_forward(const Var& x, int block) const {
  return blocks_[static_cast<std::size_t>(block)].forward(x);
}

FeatureStack Tower::forward(const Var& patches, const HookCallback& hook) const {
  if (val(patches).cols() != cfg_.width) {
    throw std::invalid_argument("Tower::forward: token width " +
                                std::to_string(val(patches).cols()) + " != configured " +
                                std::to_string(cfg_.width));
  }
  FeatureStack out;
  Var x = patches;
  std::size_t next_hook = 0;
  for (int b = 0; b < cfg_.blocks; ++b) {
    x = blocks_[b].forward(x);
    if (next_hook < cfg_.hook_depths.size() && cfg_.hook_depths[next_hook] == b) {
      out.per_hook.emplace_back(b, x);
      if (hook) {
        Var injection = hook(b, x);
        if (injection) {
          if (!val(injection).same_shape(val(x))) {
            throw std::invalid_argument("Tower::forward: hook injection shape " +
                                        val(injection).shape_str() + " != tokens " +
                                        val(x).shape_str());
          }
          x = add(x, injection);
        }
      }
      ++next_hook;
    }
  }
  out.final = x;
  return out;
}

InstructionEncoder::InstructionEncoder(ParamRegistry& reg, const std::string& prefix,
                                       int vocab_size, int width, int heads, int blocks,
                                       int pooled_width, Rng& init_rng)
    : vocab_size_(vocab_size), width_(width) {
  token_table_ = init_weight(reg, prefix + ".token_table", vocab_size, width, init_rng);
  pos_enc_ = sinusoid_encoding_1d(256, width);  // max instruction length
  blocks_.reserve(blocks);
  for (int b = 0; b < blocks; ++b) {
    blocks_.push_back(
        TransformerBlock::make(reg, prefix + ".block" + std::to_string(b), width, heads,
                               init_rng));
  }
  pool_w_ = init_weight(reg, prefix + ".pool.w", width, pooled_width, init_rng);
  pool_b_ = init_bias(reg, prefix + ".pool.b", pooled_width);
}

InstructionEmbedding InstructionEncoder::embed(const std::vector<std::uint32_t>& token_ids) const {
  const int m = static_cast<int>(token_ids.size());
  if (m == 0) {
    throw std::invalid_argument("InstructionEncoder: empty instruction");
  }
  if (m > pos_enc_.rows()) {
    throw std::invalid_argument("InstructionEncoder: instruction longer than supported (" +
                                std::to_string(pos_enc_.rows()) + ")");
  }
  std::vector<int> rows(m);
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(token_ids[i]) >= vocab_size_) {
      throw std::invalid_argument("InstructionEncoder: token id " +
                                  std::to_string(token_ids[i]) + " out of vocab " +
                                  std::to_string(vocab_size_));
    }
    rows[i] = static_cast<int>(token_ids[i]);
  }
  Tensor pe(m, width_);
  for (int i = 0; i < m; ++i) {
    std::copy_n(pos_enc_.row_ptr(i), width_, pe.row_ptr(i));
  }
  Var x = add(gather_rows(token_table_, std::move(rows)), make_constant(std::move(pe)));
  for (const TransformerBlock& block : blocks_) {
    x = block.forward(x);
  }
  InstructionEmbedding out;
  out.tokens = x;
  out.pooled = affine(mean_rows(x), pool_w_, pool_b_);
  return out;
}

}  // namespace svla
