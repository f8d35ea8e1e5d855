#pragma once

#include <string>
#include <vector>

#include "svla/action_decoder.hpp"
#include "svla/encoders.hpp"
#include "svla/id_pruner.hpp"
#include "svla/sa_pruner.hpp"
#include "svla/scene.hpp"
#include "svla/sh_fuser.hpp"
#include "svla/svt.hpp"

namespace svla {

struct PipelineConfig {
  SceneSpec scene;
  TowerConfig tower;
  int instr_blocks = 2;

  bool sparsify = true;
  int ratio = 8;  // N / |Z| for sparsified configs
  int cue_k = 5;
  int anchor_h = 3;
  int agg_tokens = 3;
  int agg_rounds = 1;
  bool agg_learnable = false;  // persistent learnable init instead of zeros

  bool dense_fusion = true;
  DecoderConfig decoder;

  std::uint64_t seed = 42;

  void validate() const;
  int num_visual_tokens() const { return scene.num_patches(); }
  int z_rows() const { return sparsify ? cue_k + anchor_h : scene.num_patches(); }
};

struct ForwardOptions {
  bool trace_attention = false;
};

struct ForwardResult {
  Var pred;  // K x (7 * arms), graph-connected
  Var loss;  // scalar vs. the episode's ground-truth chunk
  Tensor pred_chunk;

  // Pruning-path intermediates (set only for sparsified configs).
  std::vector<int> cue_indices;
  std::vector<int> anchor_indices;
  Tensor cue_patch_weights;         // k x N
  std::vector<double> vl_saliency;  // per instruction token
  std::vector<double> lv_scores;    // per visual token
  Tensor similarity;                // N x M
  int zero_norm_count = 0;
  Tensor agg_attention;  // A x (N+A), head-averaged (trace_attention only)

  int seq_len = 0;
};

struct VisualEncoding {
  Var z;  // z_rows x decoder width
  InstructionEmbedding instr;
  ForwardResult partial;  // intermediates filled, decoder outputs empty
};

class Model {
 public:
  explicit Model(const PipelineConfig& cfg);

  const PipelineConfig& config() const { return cfg_; }
  ParamRegistry& params() { return reg_; }
  const ParamRegistry& params() const { return reg_; }

  VisualEncoding encode_visual(const Episode& ep, const ForwardOptions& opts = {}) const;
  // Decodes one chunk from (possibly detached) visual tokens and instruction.
  Var decode_chunk(const Var& z, const Episode& ep, const Var& instr_tokens) const;
  ForwardResult forward(const Episode& ep, const ForwardOptions& opts = {}) const;

  const ActionDecoder& decoder() const { return *decoder_; }
  long decoder_invocations() const { return decoder_->invocation_count(); }

  // Zeroes the per-tower injection projections of every dense fuser; the
  // forward pass then matches a dense_fusion=false build bit for bit.
  void zero_dense_fusion_output_layers();

  void save_checkpoint(const std::string& path, const std::string& config_text, int step) const;
  // Fills parameters by name from an SVT1 checkpoint; any missing record or
  // shape mismatch is a hard error.
  void load_params(const svt::File& checkpoint);

 private:
  PipelineConfig cfg_;
  ParamRegistry reg_;
  std::unique_ptr<Tower> sem_tower_;
  std::unique_ptr<Tower> spa_tower_;
  std::unique_ptr<InstructionEncoder> instr_enc_;
  Var instr_proj_;  // similarity projection [tower_width x instr_width]
  Var film_w_, film_b_;
  AttentionParams sa_attn_;
  Var agg_init_;  // used only when agg_learnable
  std::vector<DenseFuserParams> dense_fusers_;
  MlpParams sparse_fuser_;
  MlpParams vl_proj_;
  std::unique_ptr<ActionDecoder> decoder_;
};

// Checkpoint metadata helpers shared by the CLI.
std::string checkpoint_config_text(const svt::File& checkpoint);
int checkpoint_step(const svt::File& checkpoint);

// Fraction of target-mask patches among the anchors (0 when not sparsified).
double selection_recall(const ForwardResult& fr, const Episode& ep);
// All continuous errors below 0.1 and the thresholded gripper column exact.
bool success_proxy(const Tensor& pred_chunk, const Episode& ep);

}  // namespace svla
