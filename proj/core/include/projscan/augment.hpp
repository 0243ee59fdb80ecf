#pragma once

#include <array>
#include <vector>

#include "projscan/image.hpp"
#include "projscan/projection.hpp"
#include "projscan/rng.hpp"

namespace projscan {

/// Ranges the per-subject warp parameters are drawn from. Scale and the
/// two angles are uniform over their intervals; the elastic control
/// displacements are normal with the given pixel sigma.
struct AugmentRanges {
  float scale_lo = 0.95f;
  float scale_hi = 1.05f;
  float rotation_deg = 5.0f; // drawn from [-rotation_deg, +rotation_deg]
  float shear_deg = 3.0f;    // drawn from [-shear_deg, +shear_deg]
  int elastic_grid = 8;      // control points per side
  float elastic_sigma = 2.0f;

  /// ConfigError when a range is empty, negative, or the grid is < 2.
  void validate() const;
};

/// One concrete sampled warp. The affine part acts about the image
/// center; the elastic part displaces each output pixel's sampling
/// location by a field interpolated bilinearly between the grid x grid
/// control points, which span the image corner to corner.
struct AugmentParams {
  float scale = 1.0f;
  float rotation_deg = 0.0f;
  float shear_deg = 0.0f;
  int grid = 0;          // 0 when there is no elastic field
  std::vector<float> dx; // grid*grid control displacements, row-major
  std::vector<float> dy;

  static AugmentParams identity() { return {}; }
  bool is_identity() const;
};

/// Fixed draw order (scale, rotation, shear, dx row-major, dy row-major)
/// so a given generator state always yields the same transform.
AugmentParams sample_augment_params(const AugmentRanges& ranges, Rng& rng);

/// Warps the image: output(p) = input(A^-1 (p - c) + c + d(p)) with A
/// the forward affine rotation * shear * scale about the center c and
/// d the elastic field, sampled bilinearly with zero fill outside the
/// input. A bright spot therefore lands at its forward-mapped
/// coordinate. Identity parameters return the input bit-exactly.
Image2D augment_image(const Image2D& img, const AugmentParams& params);

/// Applies one warp per plane to every channel of the set, so all
/// channels of a subject deform coherently within each plane. Channel
/// value ranges are refreshed from the warped images.
ProjectionSet augment_projection_set(const ProjectionSet& ps,
                                     const std::array<AugmentParams, 3>& per_plane);

} // namespace projscan
