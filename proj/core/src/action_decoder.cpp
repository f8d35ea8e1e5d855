#include "svla/action_decoder.hpp"

#include <stdexcept>

namespace svla {

ActionMode parse_action_mode(const std::string& name) {
  if (name == "coupled") {
    return ActionMode::coupled;
  }
  if (name == "lite") {
    return ActionMode::lite;
  }
  if (name == "conventional") {
    return ActionMode::conventional;
  }
  throw std::invalid_argument("unknown action mode '" + name +
                              "' (expected coupled|lite|conventional)");
}

std::string action_mode_name(ActionMode mode) {
  switch (mode) {
    case ActionMode::coupled:
      return "coupled";
    case ActionMode::lite:
      return "lite";
    case ActionMode::conventional:
      return "conventional";
  }
  return "?";
}

int tokens_per_step(ActionMode mode) {
  switch (mode) {
    case ActionMode::coupled:
      return 3;
    case ActionMode::lite:
      return 1;
    case ActionMode::conventional:
      return 7;
  }
  return 0;
}

std::int64_t coupler_token_count(int chunk_len, int arms, ActionMode mode) {
  if (chunk_len < 1 || arms < 1) {
    throw std::invalid_argument("coupler_token_count: chunk_len and arms must be >= 1");
  }
  return static_cast<std::int64_t>(tokens_per_step(mode)) * chunk_len * arms;
}

void DecoderConfig::validate() const {
  if (layers < 0) {
    throw std::invalid_argument("DecoderConfig: layers must be >= 0");
  }
  if (width < 2 || heads < 1 || width % heads != 0) {
    throw std::invalid_argument("DecoderConfig: width " + std::to_string(width) +
                                " not divisible by heads " + std::to_string(heads));
  }
  if (chunk_len < 1 || arms < 1) {
    throw std::invalid_argument("DecoderConfig: chunk_len and arms must be >= 1");
  }
}

ActionDecoder::ActionDecoder(ParamRegistry& reg, const std::string& prefix,
                             const DecoderConfig& cfg, int instr_width, Rng& init_rng)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg.width;
  proprio_w_ = init_weight(reg, prefix + ".proprio.w", 7, d, init_rng);
  proprio_b_ = init_bias(reg, prefix + ".proprio.b", d);
  instr_w_ = init_weight(reg, prefix + ".instr.w", instr_width, d, init_rng);
  instr_b_ = init_bias(reg, prefix + ".instr.b", d);
  type_table_ = init_weight(reg, prefix + ".type_table", tokens_per_step(cfg.mode), d, init_rng);
  step_enc_ = sinusoid_encoding_1d(cfg.chunk_len * cfg.arms, d);
  blocks_.reserve(cfg.layers);
  for (int b = 0; b < cfg.layers; ++b) {
    blocks_.push_back(
        TransformerBlock::make(reg, prefix + ".block" + std::to_string(b), d, cfg.heads,
                               init_rng));
  }
  head_trans_w_ = init_weight(reg, prefix + ".head.trans.w", d, 3, init_rng);
  head_trans_b_ = init_bias(reg, prefix + ".head.trans.b", 3);
  head_rot_w_ = init_weight(reg, prefix + ".head.rot.w", d, 3, init_rng);
  head_rot_b_ = init_bias(reg, prefix + ".head.rot.b", 3);
  head_grip_w_ = init_weight(reg, prefix + ".head.grip.w", d, 1, init_rng);
  head_grip_b_ = init_bias(reg, prefix + ".head.grip.b", 1);
  if (cfg.mode == ActionMode::conventional) {
    for (int j = 0; j < 7; ++j) {
      scalar_head_w_.push_back(
          init_weight(reg, prefix + ".head.dof" + std::to_string(j) + ".w", d, 1, init_rng));
      scalar_head_b_.push_back(
          init_bias(reg, prefix + ".head.dof" + std::to_string(j) + ".b", 1));
    }
  }
}

int ActionDecoder::placeholder_count() const {
  return tokens_per_step(cfg_.mode) * cfg_.chunk_len * cfg_.arms;
}

int ActionDecoder::sequence_length(int z_rows, int instr_rows) const {
  return z_rows + 1 + instr_rows + placeholder_count();
}

Var ActionDecoder::build_sequence(const Var& z_rows, const std::array<double, 7>& proprio,
                                  const Var& instr_tokens) const {
  const int d = cfg_.width;
  if (val(z_rows).cols() != d) {
    throw std::invalid_argument("build_sequence: Z width " + val(z_rows).shape_str() +
                                " != decoder width " + std::to_string(d));
  }
  Var q = affine(make_constant(Tensor::row({proprio[0], proprio[1], proprio[2], proprio[3],
                                            proprio[4], proprio[5], proprio[6]})),
                 proprio_w_, proprio_b_);
  Var instr = affine(instr_tokens, instr_w_, instr_b_);

  // Placeholder (step i, type u) = type embedding u + step encoding i; content
  // alone distinguishes positions (the decoder adds no global positions).
  const int per_step = tokens_per_step(cfg_.mode);
  const int total_steps = cfg_.chunk_len * cfg_.arms;
  std::vector<int> type_rows(static_cast<std::size_t>(total_steps) * per_step);
  Tensor steps(total_steps * per_step, d);
  for (int s = 0; s < total_steps; ++s) {
    for (int u = 0; u < per_step; ++u) {
      const int r = s * per_step + u;
      type_rows[r] = u;
      std::copy_n(step_enc_.row_ptr(s), d, steps.row_ptr(r));
    }
  }
  Var placeholders = add(gather_rows(type_table_, std::move(type_rows)),
                         make_constant(std::move(steps)));
  return concat_rows({z_rows, q, instr, placeholders});
}

Var ActionDecoder::parallel_decode(const Var& seq) const {
  ++invocation_count_;
  Var x = seq;
  for (const TransformerBlock& block : blocks_) {
    x = block.forward(x);
  }
  return x;
}

Var ActionDecoder::decode_heads(const Var& decoded, int z_rows, int instr_rows) const {
  const int per_step = tokens_per_step(cfg_.mode);
  const int total_steps = cfg_.chunk_len * cfg_.arms;
  const int offset = z_rows + 1 + instr_rows;
  if (val(decoded).rows() != offset + total_steps * per_step) {
    throw std::invalid_argument("decode_heads: sequence rows " +
                                std::to_string(val(decoded).rows()) +
                                " do not match layout offset " + std::to_string(offset) +
                                " + placeholders " + std::to_string(total_steps * per_step));
  }

  auto rows_of_type = [&](int u) {
    std::vector<int> rows(total_steps);
    for (int s = 0; s < total_steps; ++s) {
      rows[s] = offset + s * per_step + u;
    }
    return gather_rows(decoded, std::move(rows));
  };

  Var per_arm_steps;  // total_steps x 7
  switch (cfg_.mode) {
    case ActionMode::coupled: {
      Var t = affine(rows_of_type(0), head_trans_w_, head_trans_b_);
      Var r = affine(rows_of_type(1), head_rot_w_, head_rot_b_);
      Var g = affine(rows_of_type(2), head_grip_w_, head_grip_b_);
      per_arm_steps = concat_cols(concat_cols(t, r), g);
      break;
    }
    case ActionMode::lite: {
      Var h = rows_of_type(0);
      Var t = affine(h, head_trans_w_, head_trans_b_);
      Var r = affine(h, head_rot_w_, head_rot_b_);
      Var g = affine(h, head_grip_w_, head_grip_b_);
      per_arm_steps = concat_cols(concat_cols(t, r), g);
      break;
    }
    case ActionMode::conventional: {
      Var acc;
      for (int j = 0; j < 7; ++j) {
        Var dof = affine(rows_of_type(j), scalar_head_w_[j], scalar_head_b_[j]);
        acc = (j == 0) ? dof : concat_cols(acc, dof);
      }
      per_arm_steps = acc;
      break;
    }
  }

  if (cfg_.arms == 1) {
    return per_arm_steps;
  }
  // Arm-major placeholder layout folds back to K x (7 * arms).
  Var chunk;
  for (int a = 0; a < cfg_.arms; ++a) {
    Var arm = slice_rows(per_arm_steps, a * cfg_.chunk_len, (a + 1) * cfg_.chunk_len);
    chunk = (a == 0) ? arm : concat_cols(chunk, arm);
  }
  return chunk;
}

Var chunk_loss(const Var& pred, const Var& target) {
  if (!val(pred).same_shape(val(target))) {
    throw std::invalid_argument("chunk_loss: shape mismatch " + val(pred).shape_str() + " vs " +
                                val(target).shape_str());
  }
  return mse(pred, target);
}

Tensor threshold_gripper(Tensor chunk) {
  for (int i = 0; i < chunk.rows(); ++i) {
    for (int c = 6; c < chunk.cols(); c += 7) {
      chunk.at(i, c) = chunk.at(i, c) >= 0.5 ? 1.0 : 0.0;
    }
  }
  return chunk;
}

}  // namespace svla
