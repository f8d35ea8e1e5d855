#include "svla/model.hpp"

#include <cmath>
#include <stdexcept>

namespace svla {

namespace {
constexpr std::uint64_t kSemanticNoiseSalt = 0x53454d5f4e4f4953ULL;
constexpr std::uint64_t kSpatialNoiseSalt = 0x5350415f4e4f4953ULL;
}  // namespace

void PipelineConfig::validate() const {
  scene.validate();
  tower.validate();
  decoder.validate();
  if (decoder.chunk_len != scene.chunk_len) {
    throw std::invalid_argument("PipelineConfig: decoder chunk_len " +
                                std::to_string(decoder.chunk_len) + " != scene chunk_len " +
                                std::to_string(scene.chunk_len));
  }
  if (instr_blocks < 0) {
    throw std::invalid_argument("PipelineConfig: instr_blocks must be >= 0");
  }
  if (sparsify) {
    const int n = scene.num_patches();
    if (ratio < 1 || n % ratio != 0) {
      throw std::invalid_argument("PipelineConfig: N = " + std::to_string(n) +
                                  " not divisible by ratio " + std::to_string(ratio));
    }
    const int budget = n / ratio;
    if (cue_k < 1 || anchor_h < 1 || cue_k + anchor_h != budget) {
      throw std::invalid_argument("PipelineConfig: cue_k + anchor_h must equal N/ratio = " +
                                  std::to_string(budget) + ", got " + std::to_string(cue_k) +
                                  " + " + std::to_string(anchor_h));
    }
    if (cue_k > scene.instr_len) {
      throw std::invalid_argument("PipelineConfig: cue_k " + std::to_string(cue_k) +
                                  " exceeds instruction length " +
                                  std::to_string(scene.instr_len));
    }
    if (agg_tokens < 1 || agg_rounds < 1) {
      throw std::invalid_argument("PipelineConfig: agg_tokens and agg_rounds must be >= 1");
    }
  }
}

Model::Model(const PipelineConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int width = cfg_.tower.width;
  Rng init_rng(cfg_.seed);

  // Construction order is fixed and does not depend on behavior flags
  // (sparsify, dense_fusion), so configs differing only in those flags get
  // bit-identical parameters from the same seed.
  sem_tower_ = std::make_unique<Tower>(reg_, "tower.sem/", cfg_.tower, cfg_.scene.grid_side,
                                       kSemanticNoiseSalt, init_rng);
  spa_tower_ = std::make_unique<Tower>(reg_, "tower.spa/", cfg_.tower, cfg_.scene.grid_side,
                                       kSpatialNoiseSalt, init_rng);
  instr_enc_ = std::make_unique<InstructionEncoder>(reg_, "instr/", cfg_.scene.vocab_size, width,
                                                    cfg_.tower.heads, cfg_.instr_blocks, width,
                                                    init_rng);
  instr_proj_ = init_weight(reg_, "pruner.id/instr_proj", width, width, init_rng);
  film_w_ = init_weight(reg_, "pruner.sa/film.w", width, 2 * width, init_rng);
  film_b_ = init_bias(reg_, "pruner.sa/film.b", 2 * width);
  sa_attn_ = make_attention_params(reg_, "pruner.sa/attn", width, init_rng);
  if (cfg_.agg_learnable) {
    agg_init_ = reg_.add("pruner.sa/agg_init", Tensor(cfg_.agg_tokens, width));
  }

  const int fuse_hidden = 2 * width;
  for (std::size_t i = 0; i < cfg_.tower.hook_depths.size(); ++i) {
    const std::string prefix = "fuser/dense" + std::to_string(i);
    DenseFuserParams f;
    f.trunk = make_mlp_params(reg_, prefix + ".trunk", 2 * width, fuse_hidden, width, init_rng);
    f.proj_sig_w = init_zero_weight(reg_, prefix + ".proj_sig.w", width, width);
    f.proj_sig_b = init_bias(reg_, prefix + ".proj_sig.b", width);
    f.proj_din_w = init_zero_weight(reg_, prefix + ".proj_din.w", width, width);
    f.proj_din_b = init_bias(reg_, prefix + ".proj_din.b", width);
    dense_fusers_.push_back(std::move(f));
  }
  sparse_fuser_ =
      make_mlp_params(reg_, "fuser/sparse", 2 * width, fuse_hidden, cfg_.decoder.width, init_rng);
  vl_proj_ = make_mlp_params(reg_, "fuser/vl", width, fuse_hidden, cfg_.decoder.width, init_rng);

  decoder_ = std::make_unique<ActionDecoder>(reg_, "decoder/", cfg_.decoder, width, init_rng);
}

VisualEncoding Model::encode_visual(const Episode& ep, const ForwardOptions& opts) const {
  VisualEncoding out;
  out.instr = instr_enc_->embed(ep.instruction);

  Var x_sig = sem_tower_->embed_patches(ep, cfg_.scene.noise_std);
  Var x_din = spa_tower_->embed_patches(ep, cfg_.scene.noise_std);

  // Both towers step in lockstep so the dense fuser sees block-matched
  // features; injections are residual.
  std::size_t next_hook = 0;
  for (int b = 0; b < cfg_.tower.blocks; ++b) {
    x_sig = sem_tower_->block_forward(x_sig, b);
    x_din = spa_tower_->block_forward(x_din, b);
    if (next_hook < cfg_.tower.hook_depths.size() && cfg_.tower.hook_depths[next_hook] == b) {
      if (cfg_.dense_fusion) {
        auto [inj_sig, inj_din] = dense_fuse(x_sig, x_din, dense_fusers_[next_hook]);
        x_sig = add(x_sig, inj_sig);
        x_din = add(x_din, inj_din);
      }
      ++next_hook;
    }
  }

  if (!cfg_.sparsify) {
    out.z = sparse_fuse(x_sig, x_din, sparse_fuser_);
    return out;
  }

  PruneResult pruned = prune(x_sig, out.instr.tokens, instr_proj_, cfg_.cue_k, cfg_.anchor_h);
  out.partial.cue_indices = pruned.cues.cue_indices;
  out.partial.anchor_indices = pruned.anchors.anchor_indices;
  out.partial.cue_patch_weights = pruned.cues.patch_weights;
  out.partial.vl_saliency = pruned.cues.saliency;
  out.partial.lv_scores = pruned.anchors.scores;
  out.partial.similarity = val(pruned.similarity.matrix);
  out.partial.zero_norm_count = pruned.similarity.zero_norm_count;

  Var with_agg = cfg_.agg_learnable ? concat_rows({x_din, agg_init_})
                                    : append_agg(x_din, cfg_.agg_tokens);
  FilmParams film = film_params(out.instr.pooled, film_w_, film_b_);
  AttentionTrace trace;
  Var modulated = modulated_attention(with_agg, film, sa_attn_, cfg_.tower.heads,
                                      cfg_.agg_rounds, opts.trace_attention ? &trace : nullptr);
  Var agg = extract_agg(modulated, cfg_.agg_tokens);

  if (opts.trace_attention && !trace.head_probs.empty()) {
    const int total = val(modulated).rows();
    Tensor avg(cfg_.agg_tokens, total);
    for (const Tensor& probs : trace.head_probs) {
      for (int a = 0; a < cfg_.agg_tokens; ++a) {
        const double* src = probs.row_ptr(total - cfg_.agg_tokens + a);
        double* dst = avg.row_ptr(a);
        for (int j = 0; j < total; ++j) {
          dst[j] += src[j];
        }
      }
    }
    const double inv = 1.0 / static_cast<double>(trace.head_probs.size());
    for (double& v : avg.vec()) {
      v *= inv;
    }
    out.partial.agg_attention = std::move(avg);
  }

  Var z_fusion = sparse_fuse(pruned.anchors.vectors, agg, sparse_fuser_);
  Var z_vl = project_vl(pruned.cues.vectors, vl_proj_);
  out.z = assemble_z(z_vl, z_fusion).combined;
  return out;
}

Var Model::decode_chunk(const Var& z, const Episode& ep, const Var& instr_tokens) const {
  Var seq = decoder_->build_sequence(z, ep.proprio, instr_tokens);
  Var decoded = decoder_->parallel_decode(seq);
  return decoder_->decode_heads(decoded, val(z).rows(), val(instr_tokens).rows());
}

ForwardResult Model::forward(const Episode& ep, const ForwardOptions& opts) const {
  VisualEncoding enc = encode_visual(ep, opts);
  ForwardResult out = std::move(enc.partial);
  out.pred = decode_chunk(enc.z, ep, enc.instr.tokens);
  out.pred_chunk = val(out.pred);
  out.seq_len = decoder_->sequence_length(val(enc.z).rows(), val(enc.instr.tokens).rows());
  Tensor target(cfg_.scene.chunk_len, 7, ep.action_chunk);
  out.loss = chunk_loss(out.pred, make_constant(std::move(target)));
  return out;
}

void Model::zero_dense_fusion_output_layers() {
  for (DenseFuserParams& f : dense_fusers_) {
    f.proj_sig_w->value.fill(0.0);
    f.proj_sig_b->value.fill(0.0);
    f.proj_din_w->value.fill(0.0);
    f.proj_din_b->value.fill(0.0);
  }
}

void Model::save_checkpoint(const std::string& path, const std::string& config_text,
                            int step) const {
  svt::Writer w;
  w.add_u32("meta/step", {1}, {static_cast<std::uint32_t>(step)});
  w.add_u8("meta/config", {config_text.size()},
           std::vector<std::uint8_t>(config_text.begin(), config_text.end()));
  for (const ParamEntry& e : reg_.entries()) {
    const Tensor& t = e.var->value;
    w.add_f64("param/" + e.name,
              {static_cast<std::uint64_t>(t.rows()), static_cast<std::uint64_t>(t.cols())},
              t.vec());
  }
  w.save(path);
}

void Model::load_params(const svt::File& checkpoint) {
  std::size_t param_records = 0;
  for (const svt::Record& r : checkpoint.records) {
    if (r.name.rfind("param/", 0) == 0) {
      ++param_records;
    }
  }
  if (param_records != reg_.entries().size()) {
    throw std::runtime_error("checkpoint: has " + std::to_string(param_records) +
                             " parameters, model expects " +
                             std::to_string(reg_.entries().size()));
  }
  for (const ParamEntry& e : reg_.entries()) {
    const svt::Record& rec = checkpoint.get("param/" + e.name);
    Tensor& t = e.var->value;
    if (rec.extents.size() != 2 || rec.extents[0] != static_cast<std::uint64_t>(t.rows()) ||
        rec.extents[1] != static_cast<std::uint64_t>(t.cols())) {
      throw std::runtime_error("checkpoint: parameter '" + e.name + "' has mismatched shape");
    }
    t.vec() = rec.as_f64();
  }
}

std::string checkpoint_config_text(const svt::File& checkpoint) {
  const std::vector<std::uint8_t> bytes = checkpoint.get("meta/config").as_u8();
  return std::string(bytes.begin(), bytes.end());
}

int checkpoint_step(const svt::File& checkpoint) {
  return static_cast<int>(checkpoint.get("meta/step").as_u32()[0]);
}

double selection_recall(const ForwardResult& fr, const Episode& ep) {
  if (fr.anchor_indices.empty()) {
    return 0.0;
  }
  int target = 0, hit = 0;
  for (std::size_t i = 0; i < ep.target_mask.size(); ++i) {
    target += ep.target_mask[i] ? 1 : 0;
  }
  for (int idx : fr.anchor_indices) {
    hit += ep.target_mask[static_cast<std::size_t>(idx)] ? 1 : 0;
  }
  return target == 0 ? 0.0 : static_cast<double>(hit) / target;
}

bool success_proxy(const Tensor& pred_chunk, const Episode& ep) {
  Tensor snapped = threshold_gripper(pred_chunk);
  const int k = pred_chunk.rows();
  for (int i = 0; i < k; ++i) {
    for (int c = 0; c < 7; ++c) {
      const double target = ep.action_chunk[static_cast<std::size_t>(i) * 7 + c];
      if (c == 6) {
        if (snapped.at(i, c) != target) {
          return false;
        }
      } else if (std::fabs(pred_chunk.at(i, c) - target) >= 0.1) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace svla
