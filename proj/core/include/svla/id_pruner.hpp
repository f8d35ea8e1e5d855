#pragma once

#include <utility>
#include <vector>

#include "svla/autograd.hpp"

namespace svla {

// Instruction-driven pruner over the semantic stream: cosine similarity
// between visual tokens and projected instruction tokens, then two selection
// paths. Vision-to-language mapping synthesizes one cue vector per salient
// instruction token; language-to-vision filtering copies the highest-scoring
// visual rows verbatim.

struct SimilarityResult {
  Var matrix;               // N x M cosine similarities
  int zero_norm_count = 0;  // rows hit by the zero-norm division guard
};

// S_ij = cosine(proj . instr_j, visual_i); proj is trainable [d_v x d_l].
SimilarityResult build_similarity(const Var& visual, const Var& instr, const Var& proj);

struct CueTokens {
  std::vector<int> cue_indices;  // instruction columns, saliency-descending
  Var vectors;                   // k x d_v, convex combinations of visual rows
  Tensor patch_weights;          // k x N softmax weights (for dumps)
  std::vector<double> saliency;  // per-instruction-token column sums (length M)
};

CueTokens vl_mapping(const Var& similarity, const Var& visual, int k);

struct AnchorTokens {
  std::vector<int> anchor_indices;  // visual rows, score-descending
  Var vectors;                      // h x d_v, verbatim copies
  std::vector<double> scores;       // per-visual-token row sums (length N)
};

AnchorTokens lv_filtering(const Var& similarity, const Var& visual, int h);

struct PruneResult {
  SimilarityResult similarity;
  CueTokens cues;
  AnchorTokens anchors;
};

// All three steps; retains exactly k + h tokens of width d_v.
PruneResult prune(const Var& visual, const Var& instr, const Var& proj, int k, int h);

// Selection order used everywhere: score descending, ties to the lower index.
std::vector<int> top_indices(const std::vector<double>& scores, int count);

}  // namespace svla
