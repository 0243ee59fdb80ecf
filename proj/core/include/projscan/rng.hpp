#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace projscan {

/// SplitMix64 finalizer; also used as a general 64-bit mixer.
uint64_t mix64(uint64_t x);

/// Order-sensitive combination of two 64-bit values.
uint64_t hash_combine(uint64_t seed, uint64_t value);

/// FNV-1a over a byte string.
uint64_t fnv1a64(std::string_view s);

/// Deterministic pseudo-random generator (xoshiro256**), seeded through
/// SplitMix64. All distribution transforms are implemented here rather
/// than with <random> distributions, whose output is implementation
/// defined; a given seed yields the same stream on every platform.
class Rng {
public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  float uniform_f(float lo, float hi);

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  bool bernoulli(double p);

  /// Unbiased integer in [0, bound) by rejection.
  uint32_t below(uint32_t bound);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<uint32_t> permutation(uint32_t n);

private:
  uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Purpose tags for the independent per-run random streams. Keeping one
/// stream per purpose means e.g. toggling augmentation does not perturb
/// parameter init or shuffling.
namespace rng_stream {
inline constexpr uint64_t init = 0x01;
inline constexpr uint64_t dropout = 0x02;
inline constexpr uint64_t augment = 0x03;
inline constexpr uint64_t shuffle = 0x04;
inline constexpr uint64_t phantom = 0x05;
inline constexpr uint64_t labels = 0x06;
} // namespace rng_stream

/// Child generator for (seed, purpose, a, b); streams with different
/// arguments are statistically independent.
Rng make_stream(uint64_t seed, uint64_t purpose, uint64_t a = 0, uint64_t b = 0);

} // namespace projscan
