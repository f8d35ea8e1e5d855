#include "svla/harness.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "svla/io.hpp"
#include "svla/svt.hpp"

namespace svla {
namespace {

constexpr std::uint64_t kDataStream = 0x44415441ULL;   // dataset episodes
constexpr std::uint64_t kEvalStream = 0x4556414cULL;   // synthesized eval episodes
constexpr std::uint64_t kBenchStream = 0x42454e43ULL;  // bench input episode

void check_dataset_spec(const SceneSpec& want, const SceneSpec& got, const std::string& path) {
  if (want.grid_side != got.grid_side || want.num_objects != got.num_objects ||
      want.vocab_size != got.vocab_size || want.instr_len != got.instr_len ||
      want.chunk_len != got.chunk_len || want.noise_std != got.noise_std) {
    throw std::runtime_error("dataset '" + path + "' was generated with a different scene spec");
  }
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string csv = "step,train_mse,eval_mse,recall,success,tokens,flops\n";
  for (const MetricsRow& r : rows) {
    csv += std::to_string(r.step) + "," + format_double(r.train_mse) + "," +
           format_double(r.eval_mse) + "," + format_double(r.recall) + "," +
           format_double(r.success) + "," + std::to_string(r.tokens) + "," +
           std::to_string(r.flops) + "\n";
  }
  return csv;
}

Tensor grid_image(const std::vector<double>& values, int grid_side) {
  Tensor img(grid_side, grid_side);
  for (int i = 0; i < grid_side * grid_side; ++i) {
    img.vec()[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(i)];
  }
  return img;
}

struct LoadedModel {
  RunConfig cfg;
  std::unique_ptr<Model> model;
};

LoadedModel load_model(const std::string& checkpoint_path) {
  const svt::File file = svt::load(checkpoint_path);
  LoadedModel out;
  out.cfg = RunConfig::parse(checkpoint_config_text(file));
  out.model = std::make_unique<Model>(out.cfg.pipeline());
  out.model->load_params(file);
  return out;
}

TrainOptions train_options(const RunConfig& cfg) {
  TrainOptions opt;
  opt.steps = cfg.steps;
  opt.batch_size = cfg.batch_size;
  opt.learning_rate = cfg.learning_rate;
  opt.eval_interval = cfg.eval_interval;
  opt.seed = cfg.seed;
  const PipelineConfig p = cfg.pipeline();
  const TokenBudget budget =
      token_budget(p.scene.num_patches(), p.sparsify ? p.ratio : 1, p.cue_k, p.scene.instr_len,
                   p.scene.chunk_len, p.decoder.arms, p.decoder.mode);
  opt.tokens_metric = budget.decoder_seq;
  opt.flops_metric = total_flops(pipeline_flops(p));
  return opt;
}

}  // namespace

std::vector<Episode> synthesize_episodes(const SceneSpec& spec, std::uint64_t seed, int count,
                                         std::uint64_t stream_tag) {
  std::vector<Episode> eps;
  eps.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    eps.push_back(generate_episode(
        Rng::derive(seed ^ stream_tag, static_cast<std::uint64_t>(i)), spec));
  }
  return eps;
}

void cmd_gen_data(const RunConfig& cfg, const std::string& out_path, int count,
                  std::ostream& log) {
  Dataset ds;
  ds.spec = cfg.scene();
  ds.episodes = synthesize_episodes(ds.spec, cfg.seed, count, kDataStream);
  write_dataset(out_path, ds);

  std::map<std::uint32_t, int> histogram;
  for (const Episode& ep : ds.episodes) {
    histogram[ep.instruction[1] - kTypeBase + 1] += 1;
  }
  log << "wrote " << ds.episodes.size() << " episodes to " << out_path << "\n";
  log << "target type histogram:\n";
  for (const auto& [type, n] : histogram) {
    log << "  type " << type << ": " << n << "\n";
  }
}

TrainOutputs cmd_train(const RunConfig& cfg, const std::string& data_path,
                       const std::string& out_dir, std::ostream& log) {
  const Dataset train_ds = read_dataset(data_path);
  check_dataset_spec(cfg.scene(), train_ds.spec, data_path);

  std::vector<Episode> eval_set;
  if (!cfg.eval_data.empty()) {
    const Dataset eval_ds = read_dataset(cfg.eval_data);
    check_dataset_spec(cfg.scene(), eval_ds.spec, cfg.eval_data);
    eval_set = eval_ds.episodes;
  } else {
    eval_set = synthesize_episodes(cfg.scene(), cfg.seed, cfg.eval_episodes, kEvalStream);
  }

  std::filesystem::create_directories(out_dir);
  TrainOutputs out;
  out.checkpoint_path = out_dir + "/checkpoint.svt";
  out.metrics_path = out_dir + "/metrics.csv";

  Model model(cfg.pipeline());
  const std::string config_text = cfg.serialize();
  const auto sink = [&](const Model& m, int step) {
    m.save_checkpoint(out.checkpoint_path, config_text, step);
  };

  out.result = train_model(model, train_ds.episodes, eval_set, train_options(cfg), sink);
  write_text_file(out.metrics_path, metrics_csv(out.result.rows));

  for (const MetricsRow& r : out.result.rows) {
    log << "step " << r.step << " train_mse " << format_double(r.train_mse) << " eval_mse "
        << format_double(r.eval_mse) << " recall " << format_double(r.recall) << "\n";
  }
  if (out.result.aborted_non_finite) {
    throw std::runtime_error("training aborted: non-finite loss after step " +
                             std::to_string(out.result.final_step) +
                             "; last good checkpoint retained at " + out.checkpoint_path);
  }
  return out;
}

EvalMetrics cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
                     const std::string& out_path, std::ostream& log) {
  LoadedModel lm = load_model(checkpoint_path);
  const Dataset ds = read_dataset(data_path);
  check_dataset_spec(lm.cfg.scene(), ds.spec, data_path);

  const svt::File file = svt::load(checkpoint_path);
  const EvalMetrics m = evaluate(*lm.model, ds.episodes);
  const TrainOptions opt = train_options(lm.cfg);

  std::string csv = "step,mse,recall,success,tokens,flops\n";
  csv += std::to_string(checkpoint_step(file)) + "," + format_double(m.mse) + "," +
         format_double(m.recall) + "," + format_double(m.success) + "," +
         std::to_string(opt.tokens_metric) + "," + std::to_string(opt.flops_metric) + "\n";
  if (!out_path.empty()) {
    write_text_file(out_path, csv);
  }
  log << csv;
  return m;
}

void cmd_bench(const RunConfig& cfg, const std::string& out_path, std::ostream& log) {
  RunConfig baseline = cfg;
  baseline.sparsify = false;
  baseline.mode = "conventional";

  std::string csv = "config,stage,seq_len,flops,median_s,p95_s,actions_per_s\n";
  const std::pair<std::string, const RunConfig*> runs[] = {{"baseline", &baseline},
                                                           {"sparsified", &cfg}};
  for (const auto& [name, rc] : runs) {
    const PipelineConfig p = rc->pipeline();
    Model model(p);
    const Episode ep = generate_episode(Rng::derive(rc->seed, kBenchStream), p.scene);
    const TokenBudget budget =
        token_budget(p.scene.num_patches(), p.sparsify ? p.ratio : 1, p.cue_k, p.scene.instr_len,
                     p.scene.chunk_len, p.decoder.arms, p.decoder.mode);

    const VisualEncoding enc = model.encode_visual(ep);
    const Var z_fixed = make_constant(val(enc.z));
    const Var instr_fixed = make_constant(val(enc.instr.tokens));
    const BenchStats decode_stats = bench_callable(
        [&] { model.decode_chunk(z_fixed, ep, instr_fixed); }, cfg.bench_reps, cfg.bench_warmup);
    const BenchStats full_stats =
        bench_callable([&] { model.forward(ep); }, cfg.bench_reps, cfg.bench_warmup);

    const auto stages = pipeline_flops(p);
    const auto emit = [&](const std::string& stage, std::uint64_t seq, std::uint64_t flops,
                          const BenchStats& stats) {
      csv += name + "," + stage + "," + std::to_string(seq) + "," + std::to_string(flops) + "," +
             format_double(stats.median_s) + "," + format_double(stats.p95_s) + "," +
             format_double(actions_per_second(stats, p.scene.chunk_len, p.decoder.arms)) + "\n";
    };
    emit("decoder", budget.decoder_seq, decoder_stage_flops(p), decode_stats);
    emit("pipeline", budget.decoder_seq, total_flops(stages), full_stats);
  }

  if (!out_path.empty()) {
    write_text_file(out_path, csv);
  }
  log << csv;
}

std::vector<AblateRow> cmd_ablate(const RunConfig& cfg, const std::vector<int>& ratios,
                                  const std::string& out_path, std::ostream& log) {
  std::vector<AblateRow> rows(ratios.size());
  const int n = cfg.grid_side * cfg.grid_side;

  auto run_row = [&](std::size_t i) {
    AblateRow& row = rows[i];
    row.ratio = ratios[i];
    try {
      if (row.ratio < 1 || n % row.ratio != 0) {
        throw std::invalid_argument("N = " + std::to_string(n) + " not divisible by ratio " +
                                    std::to_string(row.ratio));
      }
      const int budget = n / row.ratio;
      if (budget < 2) {
        throw std::invalid_argument("retained budget " + std::to_string(budget) +
                                    " too small for cue + anchor split");
      }
      RunConfig rc = cfg;
      rc.sparsify = true;
      rc.ratio = row.ratio;
      rc.cue_k = std::min(cfg.cue_k, budget - 1);
      rc.anchor_h = budget - rc.cue_k;
      rc.agg_tokens = rc.anchor_h;
      rc.seed = cfg.seed ^ static_cast<std::uint64_t>(row.ratio);

      const PipelineConfig p = rc.pipeline();
      Model model(p);
      const std::vector<Episode> train_set =
          synthesize_episodes(p.scene, rc.seed, rc.dataset_count, kDataStream);
      const std::vector<Episode> eval_set =
          synthesize_episodes(p.scene, rc.seed, rc.eval_episodes, kEvalStream);
      const TrainResult tr = train_model(model, train_set, eval_set, train_options(rc));
      if (tr.aborted_non_finite || tr.rows.empty()) {
        throw std::runtime_error("training aborted (non-finite loss)");
      }
      row.tokens = budget;
      row.flops = total_flops(pipeline_flops(p));
      row.eval_mse = tr.rows.back().eval_mse;
      row.recall = tr.rows.back().recall;
      row.status = "ok";
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  };

  int workers = cfg.ablate_workers;
  if (workers <= 0) {
    workers = static_cast<int>(std::min<std::size_t>(
        ratios.size(), std::max(1u, std::thread::hardware_concurrency())));
  }
  workers = std::min<int>(workers, static_cast<int>(ratios.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      run_row(i);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < rows.size(); i = next.fetch_add(1)) {
          run_row(i);
        }
      });
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }

  std::string csv = "ratio,tokens,flops,eval_mse,recall,status\n";
  for (const AblateRow& r : rows) {
    if (r.status == "ok") {
      csv += std::to_string(r.ratio) + "," + std::to_string(r.tokens) + "," +
             std::to_string(r.flops) + "," + format_double(r.eval_mse) + "," +
             format_double(r.recall) + ",ok\n";
    } else {
      csv += std::to_string(r.ratio) + ",,,,," + r.status + "\n";
    }
  }
  if (!out_path.empty()) {
    write_text_file(out_path, csv);
  }
  log << csv;
  return rows;
}

void cmd_dump_attn(const std::string& checkpoint_path, std::uint64_t episode_seed,
                   const std::string& out_dir, std::ostream& log) {
  LoadedModel lm = load_model(checkpoint_path);
  if (!lm.cfg.sparsify) {
    throw std::runtime_error("dump-attn: checkpoint was trained without sparsification");
  }
  const PipelineConfig p = lm.cfg.pipeline();
  const Episode ep = generate_episode(episode_seed, p.scene);

  ForwardOptions opts;
  opts.trace_attention = true;
  const ForwardResult fr = lm.model->forward(ep, opts);

  std::filesystem::create_directories(out_dir);
  const int g = p.scene.grid_side;
  const int n = p.scene.num_patches();

  svt::Writer sw;
  sw.add_f64("similarity",
             {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p.scene.instr_len)},
             fr.similarity.vec());
  sw.save(out_dir + "/similarity.svt");

  for (std::size_t c = 0; c < fr.cue_indices.size(); ++c) {
    std::vector<double> weights(fr.cue_patch_weights.row_ptr(static_cast<int>(c)),
                                fr.cue_patch_weights.row_ptr(static_cast<int>(c)) + n);
    write_pgm(out_dir + "/cue_" + std::to_string(c) + ".pgm", grid_image(weights, g));
  }

  Tensor anchor_mask(g, g);
  for (int idx : fr.anchor_indices) {
    anchor_mask.vec()[static_cast<std::size_t>(idx)] = 255.0;
  }
  write_pgm_raw(out_dir + "/anchor_mask.pgm", anchor_mask);

  for (int a = 0; a < fr.agg_attention.rows(); ++a) {
    std::vector<double> weights(fr.agg_attention.row_ptr(a), fr.agg_attention.row_ptr(a) + n);
    write_pgm(out_dir + "/agg_" + std::to_string(a) + ".pgm", grid_image(weights, g));
  }

  std::string anchors_csv = "rank,patch_index,score\n";
  for (std::size_t r = 0; r < fr.anchor_indices.size(); ++r) {
    anchors_csv += std::to_string(r) + "," + std::to_string(fr.anchor_indices[r]) + "," +
                   format_double(fr.lv_scores[static_cast<std::size_t>(fr.anchor_indices[r])]) +
                   "\n";
  }
  write_text_file(out_dir + "/anchors.csv", anchors_csv);

  // Saliency weights as a softmax distribution over instruction tokens.
  double mx = fr.vl_saliency[0];
  for (double s : fr.vl_saliency) {
    mx = std::max(mx, s);
  }
  double z = 0.0;
  std::vector<double> weights(fr.vl_saliency.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    weights[j] = std::exp(fr.vl_saliency[j] - mx);
    z += weights[j];
  }
  std::string saliency_csv = "token_pos,token_id,saliency,weight\n";
  for (std::size_t j = 0; j < weights.size(); ++j) {
    saliency_csv += std::to_string(j) + "," + std::to_string(ep.instruction[j]) + "," +
                    format_double(fr.vl_saliency[j]) + "," + format_double(weights[j] / z) + "\n";
  }
  write_text_file(out_dir + "/saliency.csv", saliency_csv);

  log << "wrote " << fr.cue_indices.size() << " cue maps, anchor mask, "
      << fr.agg_attention.rows() << " aggregation maps to " << out_dir << "\n";
}

namespace {

RunConfig assemble_config(const std::string& config_path, const std::vector<std::string>& sets,
                          bool seed_given, std::uint64_t seed) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = RunConfig::load_file(config_path);
  }
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    cfg.set_key(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (seed_given) {
    cfg.seed = seed;
  }
  return cfg;
}

std::vector<int> parse_ratio_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stoi(item));
  }
  if (out.empty()) {
    throw CLI::ValidationError("--ratios", "empty ratio list");
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"svla: instruction-driven sparsified action pipeline"};
  app.require_subcommand(1);

  std::string config_path, out, data, checkpoint, out_dir, ratios = "4,8,16,32";
  std::vector<std::string> sets;
  std::uint64_t seed = 0, episode_seed = 1;
  bool seed_given = false;
  int count = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (flat key = value)");
    sub->add_option("--set", sets, "override a config key (key=value), repeatable");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t v) {
          seed = v;
          seed_given = true;
        },
        "override the config seed");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic episode dataset");
  add_common(gen);
  gen->add_option("--out", out, "output SVT1 dataset path")->required();
  gen->add_option("--count", count, "episode count (default: config dataset_count)");

  CLI::App* train = app.add_subcommand("train", "train a pipeline on a dataset");
  add_common(train);
  train->add_option("--data", data, "training dataset (default: config data path)");
  train->add_option("--out", out, "output directory for checkpoint + metrics")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data, "evaluation dataset")->required();
  eval->add_option("--out", out, "output CSV path");

  CLI::App* bench = app.add_subcommand("bench", "wall-clock + analytic efficiency report");
  add_common(bench);
  bench->add_option("--out", out, "output CSV path");

  CLI::App* ablate = app.add_subcommand("ablate", "sparsification-ratio sweep");
  add_common(ablate);
  ablate->add_option("--ratios", ratios, "comma-separated ratios (default 4,8,16,32)");
  ablate->add_option("--out", out, "output CSV path");

  CLI::App* dump = app.add_subcommand("dump-attn", "attention / cue-word dumps for one episode");
  add_common(dump);
  dump->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  dump->add_option("--episode-seed", episode_seed, "episode seed (default 1)");
  dump->add_option("--out-dir", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const RunConfig cfg = assemble_config(config_path, sets, seed_given, seed);
    if (gen->parsed()) {
      cfg.validate();
      cmd_gen_data(cfg, out, count >= 0 ? count : cfg.dataset_count, std::cout);
    } else if (train->parsed()) {
      cfg.validate();
      const std::string data_path = !data.empty() ? data : cfg.data;
      if (data_path.empty()) {
        throw std::runtime_error("train: no dataset given (--data or config 'data')");
      }
      cmd_train(cfg, data_path, out, std::cout);
    } else if (eval->parsed()) {
      cmd_eval(checkpoint, data, out, std::cout);
    } else if (bench->parsed()) {
      cfg.validate();
      cmd_bench(cfg, out, std::cout);
    } else if (ablate->parsed()) {
      cmd_ablate(cfg, parse_ratio_list(ratios), out, std::cout);
    } else if (dump->parsed()) {
      cmd_dump_attn(checkpoint, episode_seed, out_dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace svla
