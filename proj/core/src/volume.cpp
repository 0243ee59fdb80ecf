#include "projscan/volume.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "projscan/errors.hpp"

namespace projscan {

int stacking_axis(Plane plane) {
  switch (plane) {
    case Plane::sagittal: return 0;
    case Plane::coronal: return 1;
    case Plane::axial: return 2;
  }
  throw ParameterError("unknown plane");
}

const char* to_string(Plane plane) {
  switch (plane) {
    case Plane::coronal: return "coronal";
    case Plane::axial: return "axial";
    case Plane::sagittal: return "sagittal";
  }
  return "?";
}

Plane plane_from_string(const std::string& name) {
  if (name == "coronal") return Plane::coronal;
  if (name == "axial") return Plane::axial;
  if (name == "sagittal") return Plane::sagittal;
  throw ParameterError("unknown plane name: " + name);
}

std::string Dims3::str() const {
  return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
}

Volume3D::Volume3D(Dims3 dims, std::vector<float> data)
    : dims_(dims), data_(std::move(data)) {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw ValidationError("volume dimensions must be positive, got " + dims.str());
  if (data_.size() != dims.count())
    throw ValidationError("volume payload has " + std::to_string(data_.size()) +
                          " values, dims " + dims.str() + " require " +
                          std::to_string(dims.count()));
}

Volume3D Volume3D::zeros(Dims3 dims) {
  return Volume3D(dims, std::vector<float>(dims.count(), 0.0f));
}

PlaneImageDims plane_image_dims(const Dims3& dims, Plane plane) {
  switch (plane) {
    case Plane::coronal: return {dims.nz, dims.nx};
    case Plane::axial: return {dims.ny, dims.nx};
    case Plane::sagittal: return {dims.nz, dims.ny};
  }
  throw ParameterError("unknown plane");
}

int slice_count(const Dims3& dims, Plane plane) {
  return dims[stacking_axis(plane)];
}

Image2D extract_slice(const Volume3D& vol, Plane plane, int index) {
  const Dims3& d = vol.dims();
  const int n = slice_count(d, plane);
  if (index < 0 || index >= n)
    throw ParameterError("slice index " + std::to_string(index) +
                         " out of range [0, " + std::to_string(n) + ") for " +
                         std::string(to_string(plane)) + " of " + d.str());
  const PlaneImageDims id = plane_image_dims(d, plane);
  Image2D img(id.h, id.w);
  const float* src = vol.data().data();
  switch (plane) {
    case Plane::axial:
      std::memcpy(img.data().data(), src + vol.index(0, 0, index),
                  img.count() * sizeof(float));
      break;
    case Plane::coronal:
      for (int z = 0; z < d.nz; ++z)
        std::memcpy(&img.at(z, 0), src + vol.index(0, index, z),
                    static_cast<std::size_t>(d.nx) * sizeof(float));
      break;
    case Plane::sagittal:
      for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
          img.at(z, y) = src[vol.index(index, y, z)];
      break;
  }
  return img;
}

ValueReport scan_values(const Volume3D& vol) {
  ValueReport r;
  r.min = std::numeric_limits<float>::infinity();
  r.max = -std::numeric_limits<float>::infinity();
  const auto& d = vol.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const float v = d[i];
    if (!std::isfinite(v)) {
      if (r.non_finite == 0) r.first_non_finite_index = i;
      ++r.non_finite;
      continue;
    }
    if (v < r.min) r.min = v;
    if (v > r.max) r.max = v;
  }
  if (vol.data().empty() || r.non_finite == vol.data().size()) {
    r.min = 0.0f;
    r.max = 0.0f;
  }
  return r;
}

void validate_volume(const Volume3D& vol, bool strict_unit_range) {
  const ValueReport r = scan_values(vol);
  if (r.non_finite > 0)
    throw ValidationError("volume contains " + std::to_string(r.non_finite) +
                          " non-finite voxels, first at flat index " +
                          std::to_string(r.first_non_finite_index));
  if (strict_unit_range && !r.unit_range())
    throw ValidationError("likelihood volume values outside [0,1]: min " +
                          std::to_string(r.min) + ", max " + std::to_string(r.max));
}

PadAmounts pad_amounts(Dims3 in, Dims3 target) {
  PadAmounts pa;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = in[axis];
    const int t = target[axis];
    if (t < n)
      throw DimensionError("pad target " + target.str() + " smaller than input " +
                           in.str() + " on axis " + std::to_string(axis));
    const int total = t - n;
    pa.low[axis] = total / 2;
    pa.high[axis] = total - total / 2;
  }
  return pa;
}

Volume3D pad_symmetric(const Volume3D& vol, const GridSpec& grid) {
  const Dims3 in = vol.dims();
  const Dims3 out = grid.target;
  const PadAmounts pa = pad_amounts(in, out);
  if (in == out) return vol;

  Volume3D padded = Volume3D::zeros(out);
  const std::size_t row_bytes = static_cast<std::size_t>(in.nx) * sizeof(float);
  for (int z = 0; z < in.nz; ++z) {
    for (int y = 0; y < in.ny; ++y) {
      const float* src = vol.data().data() + vol.index(0, y, z);
      float* dst = padded.data().data() +
                   padded.index(pa.low[0], y + pa.low[1], z + pa.low[2]);
      std::memcpy(dst, src, row_bytes);
    }
  }
  return padded;
}

} // namespace projscan
