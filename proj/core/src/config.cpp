#include "svla/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace svla {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: key '" + key + "' wants an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: key '" + key + "' wants a u64, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(value, &pos);
    if (pos != value.size()) {
      throw std::invalid_argument("");
    }
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' wants a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") {
    return true;
  }
  if (value == "false") {
    return false;
  }
  throw std::invalid_argument("config: key '" + key + "' wants true|false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_int(key, trim(item)));
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) {
      out += ",";
    }
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    return "nan";
  }
  return std::string(buf, ptr);
}

void RunConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "grid_side") {
    grid_side = parse_int(key, value);
  } else if (key == "num_objects") {
    num_objects = parse_int(key, value);
  } else if (key == "vocab_size") {
    vocab_size = parse_int(key, value);
  } else if (key == "instr_len") {
    instr_len = parse_int(key, value);
  } else if (key == "chunk_len") {
    chunk_len = parse_int(key, value);
  } else if (key == "noise_std") {
    noise_std = parse_double(key, value);
  } else if (key == "sparsify") {
    sparsify = parse_bool(key, value);
  } else if (key == "ratio") {
    ratio = parse_int(key, value);
  } else if (key == "cue_k") {
    cue_k = parse_int(key, value);
  } else if (key == "anchor_h") {
    anchor_h = parse_int(key, value);
  } else if (key == "agg_tokens") {
    agg_tokens = parse_int(key, value);
  } else if (key == "agg_rounds") {
    agg_rounds = parse_int(key, value);
  } else if (key == "agg_learnable") {
    agg_learnable = parse_bool(key, value);
  } else if (key == "dense_fusion") {
    dense_fusion = parse_bool(key, value);
  } else if (key == "tower_blocks") {
    tower_blocks = parse_int(key, value);
  } else if (key == "tower_width") {
    tower_width = parse_int(key, value);
  } else if (key == "tower_heads") {
    tower_heads = parse_int(key, value);
  } else if (key == "hook_depths") {
    hook_depths = parse_int_list(key, value);
  } else if (key == "instr_blocks") {
    instr_blocks = parse_int(key, value);
  } else if (key == "decoder_layers") {
    decoder_layers = parse_int(key, value);
  } else if (key == "decoder_width") {
    decoder_width = parse_int(key, value);
  } else if (key == "decoder_heads") {
    decoder_heads = parse_int(key, value);
  } else if (key == "mode") {
    parse_action_mode(value);  // validates
    mode = value;
  } else if (key == "arms") {
    arms = parse_int(key, value);
  } else if (key == "learning_rate") {
    learning_rate = parse_double(key, value);
  } else if (key == "steps") {
    steps = parse_int(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_int(key, value);
  } else if (key == "eval_interval") {
    eval_interval = parse_int(key, value);
  } else if (key == "eval_episodes") {
    eval_episodes = parse_int(key, value);
  } else if (key == "dataset_count") {
    dataset_count = parse_int(key, value);
  } else if (key == "bench_reps") {
    bench_reps = parse_int(key, value);
  } else if (key == "bench_warmup") {
    bench_warmup = parse_int(key, value);
  } else if (key == "ablate_workers") {
    ablate_workers = parse_int(key, value);
  } else if (key == "data") {
    data = value;
  } else if (key == "eval_data") {
    eval_data = value;
  } else if (key == "out") {
    out = value;
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not 'key = value': '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    }
    cfg.set_key(key, value);
  }
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::serialize() const {
  std::string s;
  auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  kv("seed", std::to_string(seed));
  kv("grid_side", std::to_string(grid_side));
  kv("num_objects", std::to_string(num_objects));
  kv("vocab_size", std::to_string(vocab_size));
  kv("instr_len", std::to_string(instr_len));
  kv("chunk_len", std::to_string(chunk_len));
  kv("noise_std", format_double(noise_std));
  kv("sparsify", sparsify ? "true" : "false");
  kv("ratio", std::to_string(ratio));
  kv("cue_k", std::to_string(cue_k));
  kv("anchor_h", std::to_string(anchor_h));
  kv("agg_tokens", std::to_string(agg_tokens));
  kv("agg_rounds", std::to_string(agg_rounds));
  kv("agg_learnable", agg_learnable ? "true" : "false");
  kv("dense_fusion", dense_fusion ? "true" : "false");
  kv("tower_blocks", std::to_string(tower_blocks));
  kv("tower_width", std::to_string(tower_width));
  kv("tower_heads", std::to_string(tower_heads));
  kv("hook_depths", join_ints(hook_depths));
  kv("instr_blocks", std::to_string(instr_blocks));
  kv("decoder_layers", std::to_string(decoder_layers));
  kv("decoder_width", std::to_string(decoder_width));
  kv("decoder_heads", std::to_string(decoder_heads));
  kv("mode", mode);
  kv("arms", std::to_string(arms));
  kv("learning_rate", format_double(learning_rate));
  kv("steps", std::to_string(steps));
  kv("batch_size", std::to_string(batch_size));
  kv("eval_interval", std::to_string(eval_interval));
  kv("eval_episodes", std::to_string(eval_episodes));
  kv("dataset_count", std::to_string(dataset_count));
  kv("bench_reps", std::to_string(bench_reps));
  kv("bench_warmup", std::to_string(bench_warmup));
  kv("ablate_workers", std::to_string(ablate_workers));
  kv("data", data);
  kv("eval_data", eval_data);
  kv("out", out);
  return s;
}

SceneSpec RunConfig::scene() const {
  SceneSpec spec;
  spec.grid_side = grid_side;
  spec.num_objects = num_objects;
  spec.vocab_size = vocab_size;
  spec.instr_len = instr_len;
  spec.chunk_len = chunk_len;
  spec.noise_std = noise_std;
  return spec;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.scene = scene();
  p.tower.blocks = tower_blocks;
  p.tower.width = tower_width;
  p.tower.heads = tower_heads;
  p.tower.hook_depths = hook_depths;
  p.instr_blocks = instr_blocks;
  p.sparsify = sparsify;
  p.ratio = ratio;
  p.cue_k = cue_k;
  p.anchor_h = anchor_h;
  p.agg_tokens = agg_tokens;
  p.agg_rounds = agg_rounds;
  p.agg_learnable = agg_learnable;
  p.dense_fusion = dense_fusion;
  p.decoder.layers = decoder_layers;
  p.decoder.width = decoder_width;
  p.decoder.heads = decoder_heads;
  p.decoder.chunk_len = chunk_len;
  p.decoder.arms = arms;
  p.decoder.mode = parse_action_mode(mode);
  p.seed = seed;
  return p;
}

}  // namespace svla
