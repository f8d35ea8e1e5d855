#include "svla/sh_fuser.hpp"

#include <stdexcept>

namespace svla {

std::pair<Var, Var> dense_fuse(const Var& v_sig, const Var& v_din, const DenseFuserParams& p) {
  if (val(v_sig).rows() != val(v_din).rows()) {
    throw std::invalid_argument("dense_fuse: row counts differ, semantic " +
                                val(v_sig).shape_str() + " vs spatial " + val(v_din).shape_str());
  }
  Var fusion = mlp_forward(concat_cols(v_sig, v_din), p.trunk);
  return {affine(fusion, p.proj_sig_w, p.proj_sig_b), affine(fusion, p.proj_din_w, p.proj_din_b)};
}

Var sparse_fuse(const Var& anchors, const Var& agg, const MlpParams& p) {
  if (val(anchors).rows() != val(agg).rows()) {
    throw std::invalid_argument(
        "sparse_fuse: anchor rows (" + std::to_string(val(anchors).rows()) +
        ") must equal aggregation rows (" + std::to_string(val(agg).rows()) +
        "); configure the aggregation token count to match the anchor count");
  }
  return mlp_forward(concat_cols(anchors, agg), p);
}

Var project_vl(const Var& cues, const MlpParams& p) {
  if (val(cues).rows() < 1) {
    throw std::invalid_argument("project_vl: need at least one cue row");
  }
  return mlp_forward(cues, p);
}

FusedVisualSet assemble_z(const Var& z_vl, const Var& z_fusion) {
  if (val(z_vl).cols() != val(z_fusion).cols()) {
    throw std::invalid_argument("assemble_z: width mismatch " + val(z_vl).shape_str() + " vs " +
                                val(z_fusion).shape_str());
  }
  FusedVisualSet out;
  out.z_vl = z_vl;
  out.z_fusion = z_fusion;
  out.combined = concat_rows({z_vl, z_fusion});
  return out;
}

}  // namespace svla
