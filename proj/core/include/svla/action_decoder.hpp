#pragma once

#include <array>
#include <string>
#include <vector>

#include "svla/nn.hpp"

namespace svla {

// Typed action placeholders + a small bidirectional decoder + per-type
// regression heads. Each chunk is produced by exactly one decoder pass.

enum class ActionMode {
  coupled,       // 3 typed tokens per step (translation / rotation / gripper)
  lite,          // 1 token per step carrying all three heads
  conventional,  // 7 per-DoF tokens per step (ablation baseline)
};

ActionMode parse_action_mode(const std::string& name);
std::string action_mode_name(ActionMode mode);
int tokens_per_step(ActionMode mode);
std::int64_t coupler_token_count(int chunk_len, int arms, ActionMode mode);

struct DecoderConfig {
  int layers = 2;
  int width = 64;  // d_l
  int heads = 4;
  int chunk_len = 8;  // K
  int arms = 1;
  ActionMode mode = ActionMode::coupled;

  void validate() const;
};

class ActionDecoder {
 public:
  ActionDecoder(ParamRegistry& reg, const std::string& prefix, const DecoderConfig& cfg,
                int instr_width, Rng& init_rng);

  // Sequence order: [Z rows | proprio token | instruction rows | placeholders].
  Var build_sequence(const Var& z_rows, const std::array<double, 7>& proprio,
                     const Var& instr_tokens) const;

  // One bidirectional pass; counted. layers == 0 returns the input unchanged.
  Var parallel_decode(const Var& seq) const;

  // Reads placeholder hidden states and applies the typed heads; returns
  // K x (7 * arms).
  Var decode_heads(const Var& decoded, int z_rows, int instr_rows) const;

  int sequence_length(int z_rows, int instr_rows) const;
  int placeholder_count() const;
  long invocation_count() const { return invocation_count_; }
  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  Var proprio_w_, proprio_b_;
  Var instr_w_, instr_b_;
  Var type_table_;   // tokens_per_step x width
  Tensor step_enc_;  // (K * arms) x width, fixed sinusoid
  std::vector<TransformerBlock> blocks_;
  Var head_trans_w_, head_trans_b_;
  Var head_rot_w_, head_rot_b_;
  Var head_grip_w_, head_grip_b_;
  std::vector<Var> scalar_head_w_, scalar_head_b_;  // conventional mode only
  mutable long invocation_count_ = 0;
};

// Mean squared error over all K x 7 x arms entries; gripper stays continuous
// here (thresholding is inference-only).
Var chunk_loss(const Var& pred, const Var& target);

// Inference postprocess: every 7th column (the gripper) snapped to {0, 1} at
// 0.5.
Tensor threshold_gripper(Tensor chunk);

}  // namespace svla
