#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "svla/rng.hpp"

namespace svla {

// Instruction vocabulary layout (fixed bases; token positions 0..2 carry
// verb / target object type / destination cell, the rest are distractors).
inline constexpr int kVerbBase = 0;
inline constexpr int kNumVerbs = 8;
inline constexpr int kTypeBase = 8;
inline constexpr int kMaxObjectTypes = 8;  // object type codes 1..8; 0 = background
inline constexpr int kDestBase = 16;
inline constexpr int kNumDestCells = 16;
inline constexpr int kDistractorBase = 32;
inline constexpr int kMinVocab = kDistractorBase + 1;

struct SceneSpec {
  int grid_side = 8;  // N = grid_side^2 patches
  int num_objects = 3;
  int vocab_size = 64;
  int instr_len = 8;  // M
  int chunk_len = 8;  // K
  double noise_std = 0.1;

  int num_patches() const { return grid_side * grid_side; }
  void validate() const;  // throws std::invalid_argument on violations
};

struct Episode {
  std::vector<std::uint32_t> patch_types;  // N codes, 0 = background
  std::vector<std::uint32_t> instruction;  // M token ids
  std::array<double, 7> proprio{};         // q, entries in [-1, 1]
  std::vector<std::uint8_t> target_mask;   // N flags, >= 1 set
  std::vector<double> action_chunk;        // K x 7 row-major
  std::uint64_t seed = 0;

  double chunk_at(int step, int dof, int chunk_len) const {
    (void)chunk_len;
    return action_chunk[static_cast<std::size_t>(step) * 7 + dof];
  }
};

// Deterministic in (seed, spec). Objects occupy disjoint patch rectangles of
// 1-3 cells; instruction = [verb, target type, destination, distractors...].
Episode generate_episode(std::uint64_t seed, const SceneSpec& spec);

// Ground-truth chunk: translation interpolates proprio -> target centroid,
// rotation ramps with a half-cosine to a verb-conditioned pose, gripper flips
// from 0 to 1 at step ceil(K/2).
std::vector<double> oracle_action_chunk(const SceneSpec& spec,
                                        const std::vector<std::uint8_t>& target_mask,
                                        const std::array<double, 7>& proprio,
                                        std::uint32_t verb_token);

// Centroid of the masked patches in grid coordinates normalized to [-1, 1];
// third component is 0.
std::array<double, 3> target_centroid(int grid_side, const std::vector<std::uint8_t>& mask);

std::array<double, 3> verb_terminal_rotation(std::uint32_t verb_token);

struct Dataset {
  SceneSpec spec;
  std::vector<Episode> episodes;
};

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

}  // namespace svla
