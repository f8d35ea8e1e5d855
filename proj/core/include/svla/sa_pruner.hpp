#pragma once

#include "svla/autograd.hpp"

namespace svla {

// Spatial-aggregation pruner over the spatial stream: append zero-initialized
// aggregation tokens, run instruction-modulated self-attention, extract the
// aggregation rows.

// Original rows unchanged, `count` zero rows appended. count must be >= 1.
Var append_agg(const Var& spatial, int count);

struct FilmParams {
  Var gamma;  // 1 x d
  Var beta;   // 1 x d
};

// One affine map pooled [1,d] -> [1,2d], split into scale and shift halves.
FilmParams film_params(const Var& pooled, const Var& w, const Var& b);

// (1 + gamma) element-wise-scaled x plus beta, broadcast across tokens.
Var film_modulate(const Var& x, const FilmParams& film);

// Per round: full self-attention over all rows, then the FiLM affine. No
// residual; the modulated attention output replaces the tokens.
Var modulated_attention(const Var& tokens, const FilmParams& film, const AttentionParams& attn,
                        int heads, int rounds = 1, AttentionTrace* trace = nullptr);

// Last `count` rows, order preserved.
Var extract_agg(const Var& tokens, int count);

}  // namespace svla
