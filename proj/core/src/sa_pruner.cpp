#include "svla/sa_pruner.hpp"

#include <stdexcept>

namespace svla {

Var append_agg(const Var& spatial, int count) {
  if (count < 1) {
    throw std::invalid_argument(
        "append_agg: need at least one aggregation token (sparse fusion consumes them)");
  }
  Var zeros = make_constant(Tensor(count, val(spatial).cols()));
  return concat_rows({spatial, zeros});
}

FilmParams film_params(const Var& pooled, const Var& w, const Var& b) {
  const int d = val(pooled).cols();
  if (val(pooled).rows() != 1) {
    throw std::invalid_argument("film_params: pooled must be a row vector, got " +
                                val(pooled).shape_str());
  }
  if (val(w).rows() != d || val(w).cols() != 2 * d) {
    throw std::invalid_argument("film_params: weights must be [" + std::to_string(d) + "x" +
                                std::to_string(2 * d) + "], got " + val(w).shape_str());
  }
  Var both = affine(pooled, w, b);  // 1 x 2d
  FilmParams film;
  film.gamma = slice_cols(both, 0, d);
  film.beta = slice_cols(both, d, 2 * d);
  return film;
}

Var film_modulate(const Var& x, const FilmParams& film) {
  return add_rowvec(mul_rowvec(x, add_scalar(film.gamma, 1.0)), film.beta);
}

Var modulated_attention(const Var& tokens, const FilmParams& film, const AttentionParams& attn,
                        int heads, int rounds, AttentionTrace* trace) {
  if (rounds < 1) {
    throw std::invalid_argument("modulated_attention: rounds must be >= 1, got " +
                                std::to_string(rounds));
  }
  Var x = tokens;
  for (int r = 0; r < rounds; ++r) {
    // Only the last round's attention map is traced.
    x = film_modulate(multi_head_attention(x, attn, heads, r + 1 == rounds ? trace : nullptr),
                      film);
  }
  return x;
}

Var extract_agg(const Var& tokens, int count) {
  const int rows = val(tokens).rows();
  if (count > rows) {
    throw std::invalid_argument("extract_agg: " + std::to_string(count) +
                                " aggregation rows requested from " + std::to_string(rows));
  }
  return slice_rows(tokens, rows - count, rows);
}

}  // namespace svla
