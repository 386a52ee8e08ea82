#pragma once

#include <cmath>
#include <cstdint>

namespace sfc {

// Counter-based random stream. Every draw is a pure function of
// (seed, stream, counter), so any single draw can be reproduced in isolation
// and work can be split across threads without coordinating generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Raw 64 random bits for (stream, counter).
  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    std::uint64_t h = mix(seed_ + kGolden * (stream + 1));
    return mix(h + kGolden * counter);
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t stream, std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(stream, counter);
  }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t stream, std::uint64_t counter, std::uint64_t n) const {
    return bits(stream, counter) % n;
  }

  // Standard normal via Box-Muller; consumes counters 2k and 2k+1.
  double gaussian(std::uint64_t stream, std::uint64_t pair_index) const {
    double u1 = uniform(stream, 2 * pair_index);
    double u2 = uniform(stream, 2 * pair_index + 1);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t seed_;
};

}  // namespace sfc
