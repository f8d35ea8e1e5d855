#include "svla/nn.hpp"

#include <cmath>

namespace svla {

namespace {
constexpr double kInitStd = 0.02;
}

Var init_weight(ParamRegistry& reg, const std::string& name, int rows, int cols, Rng& rng) {
  return reg.add(name, Tensor::randn(rows, cols, rng, kInitStd));
}

Var init_bias(ParamRegistry& reg, const std::string& name, int cols) {
  return reg.add(name, Tensor(1, cols));
}

Var init_ones(ParamRegistry& reg, const std::string& name, int cols) {
  return reg.add(name, Tensor::full(1, cols, 1.0));
}

Var init_zero_weight(ParamRegistry& reg, const std::string& name, int rows, int cols) {
  return reg.add(name, Tensor(rows, cols));
}

AttentionParams make_attention_params(ParamRegistry& reg, const std::string& prefix, int width,
                                      Rng& rng) {
  AttentionParams p;
  p.wq = init_weight(reg, prefix + ".wq", width, width, rng);
  p.bq = init_bias(reg, prefix + ".bq", width);
  p.wk = init_weight(reg, prefix + ".wk", width, width, rng);
  p.bk = init_bias(reg, prefix + ".bk", width);
  p.wv = init_weight(reg, prefix + ".wv", width, width, rng);
  p.bv = init_bias(reg, prefix + ".bv", width);
  p.wo = init_weight(reg, prefix + ".wo", width, width, rng);
  p.bo = init_bias(reg, prefix + ".bo", width);
  return p;
}

MlpParams make_mlp_params(ParamRegistry& reg, const std::string& prefix, int in, int hidden,
                          int out, Rng& rng) {
  MlpParams p;
  p.w1 = init_weight(reg, prefix + ".w1", in, hidden, rng);
  p.b1 = init_bias(reg, prefix + ".b1", hidden);
  p.w2 = init_weight(reg, prefix + ".w2", hidden, out, rng);
  p.b2 = init_bias(reg, prefix + ".b2", out);
  return p;
}

TransformerBlock TransformerBlock::make(ParamRegistry& reg, const std::string& prefix, int width,
                                        int heads, Rng& rng) {
  TransformerBlock b;
  b.ln1_gamma = init_ones(reg, prefix + ".ln1.g", width);
  b.ln1_beta = init_bias(reg, prefix + ".ln1.b", width);
  b.attn = make_attention_params(reg, prefix + ".attn", width, rng);
  b.ln2_gamma = init_ones(reg, prefix + ".ln2.g", width);
  b.ln2_beta = init_bias(reg, prefix + ".ln2.b", width);
  b.mlp = make_mlp_params(reg, prefix + ".mlp", width, 4 * width, width, rng);
  b.heads = heads;
  return b;
}

Var TransformerBlock::forward(const Var& x, AttentionTrace* trace) const {
  Var h = add(x, multi_head_attention(layer_norm(x, ln1_gamma, ln1_beta), attn, heads, trace));
  return add(h, mlp_forward(layer_norm(h, ln2_gamma, ln2_beta), mlp));
}

Tensor sinusoid_encoding_1d(int positions, int width) {
  Tensor pe(positions, width);
  for (int pos = 0; pos < positions; ++pos) {
    for (int i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(width));
      const double angle = pos * freq;
      pe.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor sinusoid_encoding_2d(int grid_side, int width) {
  const int half = width / 2;
  const Tensor row_pe = sinusoid_encoding_1d(grid_side, half);
  const Tensor col_pe = sinusoid_encoding_1d(grid_side, width - half);
  Tensor pe(grid_side * grid_side, width);
  for (int r = 0; r < grid_side; ++r) {
    for (int c = 0; c < grid_side; ++c) {
      double* dst = pe.row_ptr(r * grid_side + c);
      for (int i = 0; i < half; ++i) {
        dst[i] = row_pe.at(r, i);
      }
      for (int i = 0; i < width - half; ++i) {
        dst[half + i] = col_pe.at(c, i);
      }
    }
  }
  return pe;
}

}  // namespace svla
