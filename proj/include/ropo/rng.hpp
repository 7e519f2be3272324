#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace ropo {

/// Deterministic pseudo-random source used for every random decision in the
/// project (world generation, dataset sampling, label flips, coordinate
/// picks).  The engine is xoshiro256++ seeded through splitmix64 -- both are
/// fixed published algorithms, so streams are bit-identical across platforms
/// and compilers, unlike the <random> distribution templates.
///
/// Draw transforms are hand-rolled for the same reason:
///   uniform01 : 53-bit mantissa in [0, 1)
///   normal    : Box-Muller on two uniform draws (second value cached)
///   below(n)  : rejection-sampled unbiased integer in [0, n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the 256-bit state
    std::uint64_t x = seed;
    for (auto& word : state_) {
      word = splitmix64(x);
    }
  }

  /// Next raw 64-bit word (xoshiro256++).
  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with full 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Unbiased integer in [0, n), n >= 1 (modulo rejection).
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n) + 1;
    if (rem == n) {
      rem = 0;  // n divides 2^64, no rejection region
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t x = next_u64();
    while (x > limit) {
      x = next_u64();
    }
    return x % n;
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4] = {};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent substream seed from a base seed and a stream tag,
/// so one experiment seed can drive world / dataset / noise draws without
/// correlation between them.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (0x632be59bd9b4e019ULL * (stream + 1));
  std::uint64_t z = Rng::splitmix64(x);
  return Rng::splitmix64(x) ^ z;
}

}  // namespace ropo
