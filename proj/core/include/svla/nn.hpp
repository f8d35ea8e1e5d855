#pragma once

#include <string>

#include "svla/autograd.hpp"
#include "svla/rng.hpp"

namespace svla {

// Weights: Gaussian std 0.02; biases and layer-norm shifts: zero; layer-norm
// scales: one. All draws come from the given rng in construction order, so a
// fixed seed yields bit-identical parameters.
Var init_weight(ParamRegistry& reg, const std::string& name, int rows, int cols, Rng& rng);
Var init_bias(ParamRegistry& reg, const std::string& name, int cols);
Var init_ones(ParamRegistry& reg, const std::string& name, int cols);
Var init_zero_weight(ParamRegistry& reg, const std::string& name, int rows, int cols);

AttentionParams make_attention_params(ParamRegistry& reg, const std::string& prefix, int width,
                                      Rng& rng);
MlpParams make_mlp_params(ParamRegistry& reg, const std::string& prefix, int in, int hidden,
                          int out, Rng& rng);

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)). MLP hidden
// is 4x width, GELU activation.
struct TransformerBlock {
  Var ln1_gamma, ln1_beta;
  AttentionParams attn;
  Var ln2_gamma, ln2_beta;
  MlpParams mlp;
  int heads = 1;

  static TransformerBlock make(ParamRegistry& reg, const std::string& prefix, int width,
                               int heads, Rng& rng);
  Var forward(const Var& x, AttentionTrace* trace = nullptr) const;
};

// Sinusoidal encodings (fixed, not trained).
Tensor sinusoid_encoding_1d(int positions, int width);
// Rows encode the grid row in the first width/2 features and the grid column
// in the rest; returns grid_side^2 x width.
Tensor sinusoid_encoding_2d(int grid_side, int width);

}  // namespace svla
