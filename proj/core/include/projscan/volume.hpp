#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "projscan/image.hpp"

namespace projscan {

/// Anatomical planes in canonical order. Each plane names the axis its
/// slices are stacked along: sagittal slices stack along x, coronal
/// along y, axial along z.
enum class Plane { coronal = 0, axial = 1, sagittal = 2 };

inline constexpr std::array<Plane, 3> kCanonicalPlanes = {
    Plane::coronal, Plane::axial, Plane::sagittal};

/// Voxel-grid axis (0 = x, 1 = y, 2 = z) the plane's slices stack along.
int stacking_axis(Plane plane);

const char* to_string(Plane plane);
Plane plane_from_string(const std::string& name);

struct Dims3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Dims3&) const = default;
  std::string str() const;
};

/// Scalar 3D grid with 32-bit float values, row-major with x fastest:
/// data[(z*ny + y)*nx + x].
class Volume3D {
public:
  Volume3D() = default;
  Volume3D(Dims3 dims, std::vector<float> data);
  static Volume3D zeros(Dims3 dims);

  const Dims3& dims() const { return dims_; }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
  }
  float at(int x, int y, int z) const { return data_[index(x, y, z)]; }
  float& at(int x, int y, int z) { return data_[index(x, y, z)]; }

private:
  Dims3 dims_{};
  std::vector<float> data_;
};

struct PlaneImageDims {
  int h = 0;
  int w = 0;
};

/// Image dims of one slice perpendicular to the plane's stacking axis.
/// Coronal slices are (nz, nx), axial (ny, nx), sagittal (nz, ny): the
/// slower-varying remaining volume axis becomes the image row axis.
PlaneImageDims plane_image_dims(const Dims3& dims, Plane plane);

/// Number of slices stacked along the plane's axis.
int slice_count(const Dims3& dims, Plane plane);

/// Copies slice `index` (0-based along the stacking axis) out of the volume.
Image2D extract_slice(const Volume3D& vol, Plane plane, int index);

struct ValueReport {
  std::size_t non_finite = 0;
  std::size_t first_non_finite_index = 0;
  float min = 0.0f;
  float max = 0.0f;
  bool unit_range() const { return min >= 0.0f && max <= 1.0f; }
};

ValueReport scan_values(const Volume3D& vol);

/// Throws ValidationError when non-finite voxels are present (count and
/// first offending index in the message). A range outside [0, 1] throws
/// only when strict_unit_range is set; likelihood maps are expected to be
/// in range, phantoms and raw intensities need not be.
void validate_volume(const Volume3D& vol, bool strict_unit_range = false);

struct GridSpec {
  Dims3 target{256, 256, 208};
};

struct PadAmounts {
  std::array<int, 3> low{0, 0, 0};
  std::array<int, 3> high{0, 0, 0};
};

/// Per-axis zero padding: low = floor((target-n)/2), high = ceil((target-n)/2);
/// an odd remainder goes to the high-index side. Throws DimensionError when a
/// target dimension is smaller than the input.
PadAmounts pad_amounts(Dims3 in, Dims3 target);

/// Centers the input block inside the target grid with zero fill. The voxel
/// sum and the multiset of nonzero values are preserved.
Volume3D pad_symmetric(const Volume3D& vol, const GridSpec& grid);

} // namespace projscan
