#include "svla/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svla/svt.hpp"

namespace svla {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Shape {
  int h, w;
};

// Areas of 1-3 cells keep objects coverable by small anchor budgets while
// still exercising multi-patch centroids.
constexpr Shape kShapes[] = {{1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}};

}  // namespace

void SceneSpec::validate() const {
  if (grid_side < 2) {
    throw std::invalid_argument("SceneSpec: grid_side must be >= 2, got " +
                                std::to_string(grid_side));
  }
  if (num_objects < 1 || num_objects > num_patches() / 4) {
    throw std::invalid_argument("SceneSpec: num_objects must be in [1, N/4], got " +
                                std::to_string(num_objects) + " for N = " +
                                std::to_string(num_patches()));
  }
  if (num_objects > kMaxObjectTypes) {
    throw std::invalid_argument("SceneSpec: at most " + std::to_string(kMaxObjectTypes) +
                                " objects (distinct type codes), got " +
                                std::to_string(num_objects));
  }
  if (instr_len < 3) {
    throw std::invalid_argument("SceneSpec: instr_len must be >= 3, got " +
                                std::to_string(instr_len));
  }
  if (chunk_len < 2) {
    throw std::invalid_argument("SceneSpec: chunk_len must be >= 2, got " +
                                std::to_string(chunk_len));
  }
  if (vocab_size < kMinVocab) {
    throw std::invalid_argument("SceneSpec: vocab_size must be >= " + std::to_string(kMinVocab) +
                                ", got " + std::to_string(vocab_size));
  }
  if (noise_std < 0.0) {
    throw std::invalid_argument("SceneSpec: noise_std must be >= 0");
  }
}

std::array<double, 3> target_centroid(int grid_side, const std::vector<std::uint8_t>& mask) {
  double sr = 0.0, sc = 0.0;
  int n = 0;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
    if (mask[i]) {
      sr += i / grid_side;
      sc += i % grid_side;
      ++n;
    }
  }
  if (n == 0) {
    throw std::invalid_argument("target_centroid: empty mask");
  }
  const double denom = grid_side - 1;
  return {2.0 * (sc / n) / denom - 1.0, 2.0 * (sr / n) / denom - 1.0, 0.0};
}

std::array<double, 3> verb_terminal_rotation(std::uint32_t verb_token) {
  const double theta = 2.0 * kPi * static_cast<double>(verb_token - kVerbBase) /
                       static_cast<double>(kNumVerbs);
  return {std::cos(theta), std::sin(theta), std::cos(2.0 * theta)};
}

std::vector<double> oracle_action_chunk(const SceneSpec& spec,
                                        const std::vector<std::uint8_t>& target_mask,
                                        const std::array<double, 7>& proprio,
                                        std::uint32_t verb_token) {
  const int k = spec.chunk_len;
  const std::array<double, 3> goal = target_centroid(spec.grid_side, target_mask);
  const std::array<double, 3> rot_goal = verb_terminal_rotation(verb_token);
  const int flip = (k + 1) / 2;  // gripper closes at ceil(K/2)

  std::vector<double> chunk(static_cast<std::size_t>(k) * 7);
  for (int i = 0; i < k; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(k - 1);
    const double ramp = 0.5 * (1.0 - std::cos(kPi * t));
    double* row = chunk.data() + static_cast<std::size_t>(i) * 7;
    for (int d = 0; d < 3; ++d) {
      row[d] = proprio[d] + t * (goal[d] - proprio[d]);
    }
    for (int d = 0; d < 3; ++d) {
      row[3 + d] = proprio[3 + d] + ramp * (rot_goal[d] - proprio[3 + d]);
    }
    row[6] = (i < flip) ? 0.0 : 1.0;
  }
  return chunk;
}

Episode generate_episode(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  Rng rng(seed);
  const int g = spec.grid_side;
  const int n = spec.num_patches();

  Episode ep;
  ep.seed = seed;
  ep.patch_types.assign(n, 0);

  // Distinct object type codes via partial Fisher-Yates over 1..kMaxObjectTypes.
  std::array<int, kMaxObjectTypes> codes{};
  for (int i = 0; i < kMaxObjectTypes; ++i) {
    codes[i] = i + 1;
  }
  for (int i = 0; i < spec.num_objects; ++i) {
    const int j = i + static_cast<int>(rng.below(kMaxObjectTypes - i));
    std::swap(codes[i], codes[j]);
  }

  std::vector<std::vector<int>> object_cells(spec.num_objects);
  for (int obj = 0; obj < spec.num_objects; ++obj) {
    bool placed = false;
    for (int attempt = 0; attempt < 256 && !placed; ++attempt) {
      const Shape shape = kShapes[rng.below(std::size(kShapes))];
      if (shape.h > g || shape.w > g) {
        continue;
      }
      const int r0 = static_cast<int>(rng.below(g - shape.h + 1));
      const int c0 = static_cast<int>(rng.below(g - shape.w + 1));
      bool free = true;
      for (int r = r0; r < r0 + shape.h && free; ++r) {
        for (int c = c0; c < c0 + shape.w && free; ++c) {
          free = ep.patch_types[r * g + c] == 0;
        }
      }
      if (!free) {
        continue;
      }
      for (int r = r0; r < r0 + shape.h; ++r) {
        for (int c = c0; c < c0 + shape.w; ++c) {
          ep.patch_types[r * g + c] = static_cast<std::uint32_t>(codes[obj]);
          object_cells[obj].push_back(r * g + c);
        }
      }
      placed = true;
    }
    if (!placed) {
      throw std::runtime_error("generate_episode: object placement impossible for spec (grid " +
                               std::to_string(g) + ", objects " +
                               std::to_string(spec.num_objects) + ")");
    }
  }

  const int target = static_cast<int>(rng.below(spec.num_objects));
  ep.target_mask.assign(n, 0);
  for (int cell : object_cells[target]) {
    ep.target_mask[cell] = 1;
  }

  const auto verb = static_cast<std::uint32_t>(kVerbBase + rng.below(kNumVerbs));
  const auto dest = static_cast<std::uint32_t>(kDestBase + rng.below(kNumDestCells));
  ep.instruction.assign(spec.instr_len, 0);
  ep.instruction[0] = verb;
  ep.instruction[1] = static_cast<std::uint32_t>(kTypeBase + codes[target] - 1);
  ep.instruction[2] = dest;
  for (int i = 3; i < spec.instr_len; ++i) {
    ep.instruction[i] = static_cast<std::uint32_t>(
        kDistractorBase + rng.below(spec.vocab_size - kDistractorBase));
  }

  for (int d = 0; d < 6; ++d) {
    ep.proprio[d] = rng.uniform(-1.0, 1.0);
  }
  ep.proprio[6] = 0.0;

  ep.action_chunk = oracle_action_chunk(spec, ep.target_mask, ep.proprio, verb);
  return ep;
}

namespace {

std::string ep_key(std::size_t i, const char* field) {
  return "ep" + std::to_string(i) + "/" + field;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& ds) {
  ds.spec.validate();
  svt::Writer w;
  w.add_u32("meta/count", {1}, {static_cast<std::uint32_t>(ds.episodes.size())});
  w.add_u32("meta/grid_side", {1}, {static_cast<std::uint32_t>(ds.spec.grid_side)});
  w.add_u32("meta/num_objects", {1}, {static_cast<std::uint32_t>(ds.spec.num_objects)});
  w.add_u32("meta/vocab_size", {1}, {static_cast<std::uint32_t>(ds.spec.vocab_size)});
  w.add_u32("meta/instr_len", {1}, {static_cast<std::uint32_t>(ds.spec.instr_len)});
  w.add_u32("meta/chunk_len", {1}, {static_cast<std::uint32_t>(ds.spec.chunk_len)});
  w.add_f64("meta/noise_std", {1}, {ds.spec.noise_std});

  for (std::size_t i = 0; i < ds.episodes.size(); ++i) {
    const Episode& ep = ds.episodes[i];
    w.add_u32(ep_key(i, "patch_types"), {ep.patch_types.size()}, ep.patch_types);
    w.add_u32(ep_key(i, "instruction"), {ep.instruction.size()}, ep.instruction);
    w.add_f64(ep_key(i, "proprio"), {7}, ep.proprio.data());
    w.add_u8(ep_key(i, "target_mask"), {ep.target_mask.size()},
             std::vector<std::uint8_t>(ep.target_mask.begin(), ep.target_mask.end()));
    w.add_f64(ep_key(i, "action_chunk"),
              {static_cast<std::uint64_t>(ds.spec.chunk_len), 7}, ep.action_chunk);
    w.add_u32(ep_key(i, "seed"), {2},
              {static_cast<std::uint32_t>(ep.seed & 0xffffffffULL),
               static_cast<std::uint32_t>(ep.seed >> 32)});
  }
  w.save(path);
}

Dataset read_dataset(const std::string& path) {
  const svt::File file = svt::load(path);
  Dataset ds;
  ds.spec.grid_side = static_cast<int>(file.get("meta/grid_side").as_u32()[0]);
  ds.spec.num_objects = static_cast<int>(file.get("meta/num_objects").as_u32()[0]);
  ds.spec.vocab_size = static_cast<int>(file.get("meta/vocab_size").as_u32()[0]);
  ds.spec.instr_len = static_cast<int>(file.get("meta/instr_len").as_u32()[0]);
  ds.spec.chunk_len = static_cast<int>(file.get("meta/chunk_len").as_u32()[0]);
  ds.spec.noise_std = file.get("meta/noise_std").as_f64()[0];
  ds.spec.validate();

  const std::uint32_t count = file.get("meta/count").as_u32()[0];
  ds.episodes.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Episode& ep = ds.episodes[i];
    ep.patch_types = file.get(ep_key(i, "patch_types")).as_u32();
    ep.instruction = file.get(ep_key(i, "instruction")).as_u32();
    const std::vector<double> q = file.get(ep_key(i, "proprio")).as_f64();
    std::copy_n(q.begin(), 7, ep.proprio.begin());
    const std::vector<std::uint8_t> mask = file.get(ep_key(i, "target_mask")).as_u8();
    ep.target_mask.assign(mask.begin(), mask.end());
    ep.action_chunk = file.get(ep_key(i, "action_chunk")).as_f64();
    const std::vector<std::uint32_t> seed = file.get(ep_key(i, "seed")).as_u32();
    ep.seed = static_cast<std::uint64_t>(seed[0]) | (static_cast<std::uint64_t>(seed[1]) << 32);
  }
  return ds;
}

}  // namespace svla
