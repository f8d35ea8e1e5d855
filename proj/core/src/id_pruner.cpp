#include "svla/id_pruner.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace svla {

SimilarityResult build_similarity(const Var& visual, const Var& instr, const Var& proj) {
  if (val(proj).rows() != val(visual).cols() || val(proj).cols() != val(instr).cols()) {
    throw std::invalid_argument("build_similarity: projection " + val(proj).shape_str() +
                                " does not map instruction width " +
                                std::to_string(val(instr).cols()) + " to visual width " +
                                std::to_string(val(visual).cols()));
  }
  SimilarityResult out;
  Var projected = matmul(instr, transpose(proj));  // M x d_v
  Var v_hat = row_l2_normalize(visual, &out.zero_norm_count);
  Var l_hat = row_l2_normalize(projected, &out.zero_norm_count);
  out.matrix = matmul(v_hat, transpose(l_hat));  // N x M
  return out;
}

std::vector<int> top_indices(const std::vector<double>& scores, int count) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) {
      return scores[a] > scores[b];
    }
    return a < b;
  });
  order.resize(count);
  return order;
}

CueTokens vl_mapping(const Var& similarity, const Var& visual, int k) {
  const Tensor& s = val(similarity);
  const int m = s.cols();
  if (k < 1 || k > m) {
    throw std::invalid_argument("vl_mapping: k = " + std::to_string(k) +
                                " outside [1, M = " + std::to_string(m) + "]");
  }
  CueTokens out;
  out.saliency.assign(m, 0.0);
  for (int i = 0; i < s.rows(); ++i) {
    for (int j = 0; j < m; ++j) {
      out.saliency[j] += s.at(i, j);
    }
  }
  out.cue_indices = top_indices(out.saliency, k);

  // One cue per selected instruction column: patch-softmax weights over that
  // column, applied to the visual rows.
  Var selected_cols = gather_rows(transpose(similarity), out.cue_indices);  // k x N
  Var weights = row_softmax(selected_cols);
  out.patch_weights = val(weights);
  out.vectors = matmul(weights, visual);  // k x d_v
  return out;
}

AnchorTokens lv_filtering(const Var& similarity, const Var& visual, int h) {
  const Tensor& s = val(similarity);
  const int n = s.rows();
  if (h < 1 || h > n) {
    throw std::invalid_argument("lv_filtering: h = " + std::to_string(h) +
                                " outside [1, N = " + std::to_string(n) + "]");
  }
  AnchorTokens out;
  out.scores.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = s.row_ptr(i);
    for (int j = 0; j < s.cols(); ++j) {
      out.scores[i] += row[j];
    }
  }
  out.anchor_indices = top_indices(out.scores, h);
  out.vectors = gather_rows(visual, out.anchor_indices);
  return out;
}

PruneResult prune(const Var& visual, const Var& instr, const Var& proj, int k, int h) {
  const int n = val(visual).rows();
  const int m = val(instr).rows();
  if (k + h > n + m) {
    throw std::invalid_argument("prune: k + h = " + std::to_string(k + h) +
                                " exceeds N + M = " + std::to_string(n + m));
  }
  PruneResult out;
  out.similarity = build_similarity(visual, instr, proj);
  out.cues = vl_mapping(out.similarity.matrix, visual, k);
  out.anchors = lv_filtering(out.similarity.matrix, visual, h);
  return out;
}

}  // namespace svla
