#pragma once

#include <cmath>
#include <cstdint>

namespace svla {

// Seedable SplitMix64 generator. The raw u64 stream is byte-identical across
// platforms for the same seed; gaussians use Box-Muller (two uniforms per draw,
// no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal. Consumes exactly two u64 draws.
  double gaussian() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) {
      u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // Derives a decorrelated child seed for substream `tag`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
    return r.next_u64();
  }

  std::uint64_t state() const { return state_; }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  std::uint64_t state_;
};

}  // namespace svla
