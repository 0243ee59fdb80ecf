#include "projscan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

constexpr double kPi = 3.14159265358979323846;

float bilinear_zero(const Image2D& img, float sx, float sy) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const float fx = sx - static_cast<float>(x0);
  const float fy = sy - static_cast<float>(y0);

  const auto tap = [&](int y, int x) -> float {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0f;
    return img.at(y, x);
  };
  const float top = tap(y0, x0) * (1.0f - fx) + tap(y0, x0 + 1) * fx;
  const float bot = tap(y0 + 1, x0) * (1.0f - fx) + tap(y0 + 1, x0 + 1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

} // namespace

void AugmentRanges::validate() const {
  if (!(scale_lo > 0.0f) || !(scale_hi >= scale_lo))
    throw ConfigError("augment scale range must satisfy 0 < lo <= hi, got [" +
                      std::to_string(scale_lo) + ", " + std::to_string(scale_hi) + "]");
  if (rotation_deg < 0.0f || shear_deg < 0.0f)
    throw ConfigError("augment angle half-ranges must be non-negative");
  if (shear_deg >= 90.0f)
    throw ConfigError("augment shear must stay below 90 degrees");
  if (elastic_grid < 2)
    throw ConfigError("elastic grid needs at least 2 control points per side");
  if (elastic_sigma < 0.0f)
    throw ConfigError("elastic sigma must be non-negative");
}

bool AugmentParams::is_identity() const {
  if (scale != 1.0f || rotation_deg != 0.0f || shear_deg != 0.0f) return false;
  const auto zero = [](float v) { return v == 0.0f; };
  return std::all_of(dx.begin(), dx.end(), zero) &&
         std::all_of(dy.begin(), dy.end(), zero);
}

AugmentParams sample_augment_params(const AugmentRanges& ranges, Rng& rng) {
  ranges.validate();
  AugmentParams p;
  p.scale = rng.uniform_f(ranges.scale_lo, ranges.scale_hi);
  p.rotation_deg = rng.uniform_f(-ranges.rotation_deg, ranges.rotation_deg);
  p.shear_deg = rng.uniform_f(-ranges.shear_deg, ranges.shear_deg);
  p.grid = ranges.elastic_grid;
  const std::size_t n = static_cast<std::size_t>(p.grid) * p.grid;
  p.dx.resize(n);
  p.dy.resize(n);
  for (auto& v : p.dx) v = static_cast<float>(rng.normal()) * ranges.elastic_sigma;
  for (auto& v : p.dy) v = static_cast<float>(rng.normal()) * ranges.elastic_sigma;
  return p;
}

Image2D augment_image(const Image2D& img, const AugmentParams& params) {
  if (params.is_identity()) return img;
  if (params.grid > 0 &&
      (params.dx.size() != static_cast<std::size_t>(params.grid) * params.grid ||
       params.dy.size() != params.dx.size()))
    throw ParameterError("elastic field size does not match its grid");

  const int h = img.height();
  const int w = img.width();
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);

  // inverse of A = R(theta) * Shear(phi) * s about the center; the
  // shear slants x by y, so det A = s^2
  const double theta = params.rotation_deg * kPi / 180.0;
  const double tsh = std::tan(params.shear_deg * kPi / 180.0);
  const double s = params.scale;
  const double a11 = s * std::cos(theta);
  const double a12 = s * (std::cos(theta) * tsh - std::sin(theta));
  const double a21 = s * std::sin(theta);
  const double a22 = s * (std::sin(theta) * tsh + std::cos(theta));
  const double det = a11 * a22 - a12 * a21;
  const double i11 = a22 / det, i12 = -a12 / det;
  const double i21 = -a21 / det, i22 = a11 / det;

  // control spacing; a single-pixel axis keeps every control point at 0
  const double step_x = params.grid > 1 && w > 1
                            ? static_cast<double>(w - 1) / (params.grid - 1)
                            : 1.0;
  const double step_y = params.grid > 1 && h > 1
                            ? static_cast<double>(h - 1) / (params.grid - 1)
                            : 1.0;
  const auto field = [&](int y, int x, double& ex, double& ey) {
    if (params.grid == 0) {
      ex = ey = 0.0;
      return;
    }
    const double gx = std::min(static_cast<double>(x) / step_x,
                               static_cast<double>(params.grid - 1));
    const double gy = std::min(static_cast<double>(y) / step_y,
                               static_cast<double>(params.grid - 1));
    const int gx0 = std::min(static_cast<int>(gx), params.grid - 2);
    const int gy0 = std::min(static_cast<int>(gy), params.grid - 2);
    const double fx = gx - gx0;
    const double fy = gy - gy0;
    const auto at = [&](const std::vector<float>& d, int r, int c) {
      return static_cast<double>(d[static_cast<std::size_t>(r) * params.grid + c]);
    };
    ex = (at(params.dx, gy0, gx0) * (1 - fx) + at(params.dx, gy0, gx0 + 1) * fx) * (1 - fy) +
         (at(params.dx, gy0 + 1, gx0) * (1 - fx) + at(params.dx, gy0 + 1, gx0 + 1) * fx) * fy;
    ey = (at(params.dy, gy0, gx0) * (1 - fx) + at(params.dy, gy0, gx0 + 1) * fx) * (1 - fy) +
         (at(params.dy, gy0 + 1, gx0) * (1 - fx) + at(params.dy, gy0 + 1, gx0 + 1) * fx) * fy;
  };

  Image2D out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ux = x - cx;
      const double uy = y - cy;
      double ex, ey;
      field(y, x, ex, ey);
      const double sx = i11 * ux + i12 * uy + cx + ex;
      const double sy = i21 * ux + i22 * uy + cy + ey;
      out.at(y, x) = bilinear_zero(img, static_cast<float>(sx), static_cast<float>(sy));
    }
  }
  return out;
}

ProjectionSet augment_projection_set(const ProjectionSet& ps,
                                     const std::array<AugmentParams, 3>& per_plane) {
  ProjectionSet out;
  out.subject_id = ps.subject_id;
  out.channels.reserve(ps.channels.size());
  for (const Channel& ch : ps.channels) {
    Channel warped;
    warped.key = ch.key;
    warped.image = augment_image(ch.image, per_plane[static_cast<std::size_t>(ch.key.plane)]);
    const auto [lo, hi] =
        std::minmax_element(warped.image.data().begin(), warped.image.data().end());
    warped.min = *lo;
    warped.max = *hi;
    out.channels.push_back(std::move(warped));
  }
  return out;
}

} // namespace projscan
