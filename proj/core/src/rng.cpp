#include "projscan/rng.hpp"

#include <cmath>

#include "projscan/errors.hpp"

namespace projscan {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t seed, uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
} // namespace

Rng::Rng(uint64_t seed) {
  // Seed expansion per the xoshiro reference: run SplitMix64 off the seed.
  uint64_t sm = seed;
  for (auto& s : s_) {
    sm += 0x9e3779b97f4a7c15ull;
    uint64_t z = sm;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    s = z ^ (z >> 31);
  }
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

float Rng::uniform_f(float lo, float hi) {
  return static_cast<float>(uniform(lo, hi));
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; u1 kept away from 0 so log() is finite.
  double u1 = uniform();
  if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

uint32_t Rng::below(uint32_t bound) {
  if (bound == 0) throw ParameterError("Rng::below: bound must be positive");
  const uint32_t limit = UINT32_MAX - UINT32_MAX % bound;
  for (;;) {
    const uint32_t r = static_cast<uint32_t>(next_u64() >> 32);
    if (r < limit) return r % bound;
  }
}

std::vector<uint32_t> Rng::permutation(uint32_t n) {
  std::vector<uint32_t> p(n);
  for (uint32_t i = 0; i < n; ++i) p[i] = i;
  for (uint32_t i = n; i > 1; --i) {
    const uint32_t j = below(i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Rng make_stream(uint64_t seed, uint64_t purpose, uint64_t a, uint64_t b) {
  uint64_t h = hash_combine(mix64(seed), purpose);
  h = hash_combine(h, a);
  h = hash_combine(h, b);
  return Rng(h);
}

} // namespace projscan
