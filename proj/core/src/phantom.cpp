#include "projscan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

constexpr float kShellValue = 0.9f;
constexpr float kInteriorMean = 0.5f;

// semi-axes as distinct fractions of each half-extent, so coronal,
// axial, and sagittal silhouettes all differ
constexpr double kAxisFracX = 0.80;
constexpr double kAxisFracY = 0.64;
constexpr double kAxisFracZ = 0.72;

} // namespace

const char* to_string(PhantomSignal signal) {
  switch (signal) {
    case PhantomSignal::geometry: return "geometry";
    case PhantomSignal::variance: return "variance";
    case PhantomSignal::both: return "both";
  }
  return "?";
}

PhantomSignal phantom_signal_from_string(const std::string& name) {
  if (name == "geometry") return PhantomSignal::geometry;
  if (name == "variance") return PhantomSignal::variance;
  if (name == "both") return PhantomSignal::both;
  throw ParameterError("unknown phantom signal mode '" + name + "'");
}

Phantom generate_phantom(float age, std::uint64_t seed, const PhantomConfig& cfg) {
  if (!(age >= kPhantomAgeLo && age <= kPhantomAgeHi))
    throw ParameterError("phantom age " + std::to_string(age) + " outside [" +
                         std::to_string(kPhantomAgeLo) + ", " +
                         std::to_string(kPhantomAgeHi) + "]");
  if (cfg.dims.nx < 8 || cfg.dims.ny < 8 || cfg.dims.nz < 8)
    throw ParameterError("phantom grid must be at least 8 voxels per side");
  if (cfg.noise < 0.0f) throw ParameterError("phantom noise must be non-negative");

  const double t = (age - kPhantomAgeLo) / (kPhantomAgeHi - kPhantomAgeLo);
  const bool age_in_geometry =
      cfg.signal == PhantomSignal::geometry || cfg.signal == PhantomSignal::both;
  const bool age_in_variance =
      cfg.signal == PhantomSignal::variance || cfg.signal == PhantomSignal::both;
  const double thickness = age_in_geometry ? 0.08 + 0.14 * t : 0.15;
  const double sigma =
      cfg.noise * (age_in_variance ? 0.15 + 0.85 * t : 0.5);

  const double cx = 0.5 * (cfg.dims.nx - 1);
  const double cy = 0.5 * (cfg.dims.ny - 1);
  const double cz = 0.5 * (cfg.dims.nz - 1);
  const double ax = kAxisFracX * 0.5 * cfg.dims.nx;
  const double ay = kAxisFracY * 0.5 * cfg.dims.ny;
  const double az = kAxisFracZ * 0.5 * cfg.dims.nz;

  Volume3D vol = Volume3D::zeros(cfg.dims);
  Rng rng = make_stream(seed, rng_stream::phantom);
  for (int z = 0; z < cfg.dims.nz; ++z) {
    for (int y = 0; y < cfg.dims.ny; ++y) {
      for (int x = 0; x < cfg.dims.nx; ++x) {
        const double rx = (x - cx) / ax;
        const double ry = (y - cy) / ay;
        const double rz = (z - cz) / az;
        const double r = std::sqrt(rx * rx + ry * ry + rz * rz);
        if (r > 1.0) continue;
        if (r >= 1.0 - thickness) {
          vol.at(x, y, z) = kShellValue;
        } else {
          float v = kInteriorMean;
          if (sigma > 0.0)
            v += static_cast<float>(rng.normal() * sigma);
          vol.at(x, y, z) = std::clamp(v, 0.0f, 1.0f);
        }
      }
    }
  }
  return {std::move(vol), age, seed};
}

const std::array<double, kAgeBins>& age_bin_weights(AgeHistogram preset) {
  static const std::array<double, kAgeBins> uniform = {
      0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125};
  static const std::array<double, kAgeBins> skewed = {
      0.22, 0.19, 0.16, 0.13, 0.11, 0.08, 0.06, 0.05};
  return preset == AgeHistogram::uniform ? uniform : skewed;
}

int age_bin(float age) {
  const double width = (kPhantomAgeHi - kPhantomAgeLo) / kAgeBins;
  const int bin = static_cast<int>((age - kPhantomAgeLo) / width);
  return std::clamp(bin, 0, kAgeBins - 1);
}

std::vector<float> sample_ages(int count, AgeHistogram preset, std::uint64_t seed) {
  if (count < 1) throw ParameterError("age count must be positive");
  const auto& weights = age_bin_weights(preset);

  // largest-remainder apportionment of count over the bins
  std::array<int, kAgeBins> bin_counts{};
  std::array<double, kAgeBins> remainders{};
  int assigned = 0;
  for (int b = 0; b < kAgeBins; ++b) {
    const double quota = count * weights[static_cast<std::size_t>(b)];
    bin_counts[static_cast<std::size_t>(b)] = static_cast<int>(std::floor(quota));
    remainders[static_cast<std::size_t>(b)] =
        quota - bin_counts[static_cast<std::size_t>(b)];
    assigned += bin_counts[static_cast<std::size_t>(b)];
  }
  std::array<int, kAgeBins> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainders[static_cast<std::size_t>(a)] >
           remainders[static_cast<std::size_t>(b)];
  });
  for (int i = 0; assigned < count; ++i, ++assigned)
    ++bin_counts[static_cast<std::size_t>(order[static_cast<std::size_t>(i % kAgeBins)])];

  Rng rng = make_stream(seed, rng_stream::labels);
  const double width = (kPhantomAgeHi - kPhantomAgeLo) / kAgeBins;
  std::vector<float> ages;
  ages.reserve(static_cast<std::size_t>(count));
  for (int b = 0; b < kAgeBins; ++b) {
    const double lo = kPhantomAgeLo + b * width;
    for (int i = 0; i < bin_counts[static_cast<std::size_t>(b)]; ++i)
      ages.push_back(static_cast<float>(lo + rng.uniform() * width));
  }
  const std::vector<std::uint32_t> perm =
      rng.permutation(static_cast<std::uint32_t>(ages.size()));
  std::vector<float> shuffled(ages.size());
  for (std::size_t i = 0; i < ages.size(); ++i) shuffled[i] = ages[perm[i]];
  return shuffled;
}

} // namespace projscan
