#pragma once

#include <utility>

#include "svla/autograd.hpp"

namespace svla {

// Hierarchical fuser: dense patch-level exchange between the two towers at
// hook depths, plus sparse fusion of anchor and aggregation tokens at the end.

struct DenseFuserParams {
  MlpParams trunk;  // concat(sig, din) -> hidden -> fuse_width
  // Output layers: residual injections start at zero so training begins from
  // the unfused regime; zeroing them again disables fusion behaviorally.
  Var proj_sig_w, proj_sig_b;
  Var proj_din_w, proj_din_b;
};

// Feature-axis concat -> trunk MLP -> per-tower injections (same row counts).
std::pair<Var, Var> dense_fuse(const Var& v_sig, const Var& v_din, const DenseFuserParams& p);

// Row-wise concat of the two pruned streams -> MLP to decoder width. Hard
// error naming both counts if the row counts differ.
Var sparse_fuse(const Var& anchors, const Var& agg, const MlpParams& p);

// Per-row MLP of the cue tokens to decoder width.
Var project_vl(const Var& cues, const MlpParams& p);

struct FusedVisualSet {
  Var z_vl;      // k x d_l
  Var z_fusion;  // h x d_l
  Var combined;  // (k+h) x d_l, z_vl rows first
};

FusedVisualSet assemble_z(const Var& z_vl, const Var& z_fusion);

}  // namespace svla
