#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "projscan/rng.hpp"
#include "projscan/volume.hpp"

namespace projscan {

/// Where the age signal lives: shell geometry (thickness grows with
/// age), interior texture variance, or both.
enum class PhantomSignal { geometry, variance, both };

const char* to_string(PhantomSignal signal);
PhantomSignal phantom_signal_from_string(const std::string& name);

struct PhantomConfig {
  Dims3 dims{64, 64, 52};
  PhantomSignal signal = PhantomSignal::both;
  /// Peak sigma of the interior texture noise. 0 yields the exact
  /// analytic shell with no random draws at all.
  float noise = 0.3f;
};

struct Phantom {
  Volume3D volume;
  float age = 0.0f;
  std::uint64_t seed = 0;
};

inline constexpr float kPhantomAgeLo = 44.0f;
inline constexpr float kPhantomAgeHi = 82.0f;

/// Ellipsoid shell (value 0.9) around a textured interior (mean 0.5),
/// zero outside, clamped to [0,1]. The ellipsoid semi-axes are distinct
/// fractions of the grid so each plane sees a different silhouette.
/// Deterministic given (age, seed); ParameterError outside the age
/// range.
Phantom generate_phantom(float age, std::uint64_t seed,
                         const PhantomConfig& cfg = {});

enum class AgeHistogram { uniform, skewed };

inline constexpr int kAgeBins = 8;

/// Target bin mass for each preset; skewed puts the bulk at younger
/// ages with a tail toward 82.
const std::array<double, kAgeBins>& age_bin_weights(AgeHistogram preset);

/// Bin index of an in-range age under the kAgeBins equal-width bins.
int age_bin(float age);

/// Ages whose per-bin counts match the preset mass by largest-remainder
/// apportionment (each bin within 1 of count * weight), placed
/// uniformly inside their bin and returned in shuffled order.
std::vector<float> sample_ages(int count, AgeHistogram preset, std::uint64_t seed);

} // namespace projscan
