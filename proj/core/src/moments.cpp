#include "projscan/moments.hpp"

#include <algorithm>
#include <cmath>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

inline void update2(double& mean, double& m2, double x, double n1, double inv_n) {
  const double delta = x - mean;
  const double delta_n = delta * inv_n;
  mean += delta_n;
  m2 += delta * delta_n * n1;
}

inline void update4(double& mean, double& m2, double& m3, double& m4, double x,
                    double n1, double inv_n) {
  const double delta = x - mean;
  const double delta_n = delta * inv_n;
  const double delta_n2 = delta_n * delta_n;
  const double term1 = delta * delta_n * n1;
  const double n = n1 + 1.0;
  mean += delta_n;
  m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2 -
        4.0 * delta_n * m3;
  m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
  m2 += term1;
}

std::vector<double> reciprocal_table(int n) {
  std::vector<double> inv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i)] = 1.0 / (i + 1);
  return inv;
}

} // namespace

MomentAccumulator::MomentAccumulator(int height, int width, int order)
    : h_(height), w_(width), order_(order) {
  if (height <= 0 || width <= 0)
    throw ShapeError("accumulator dims must be positive, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  if (order != 2 && order != 4)
    throw ParameterError("moment order must be 2 or 4, got " +
                         std::to_string(order));
  const std::size_t count =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  mean_.assign(count, 0.0);
  m2_.assign(count, 0.0);
  if (order == 4) {
    m3_.assign(count, 0.0);
    m4_.assign(count, 0.0);
  }
}

void MomentAccumulator::add_slice(const float* data, std::size_t count) {
  if (count != mean_.size())
    throw ShapeError("slice has " + std::to_string(count) +
                     " pixels, accumulator is " + std::to_string(h_) + "x" +
                     std::to_string(w_));
  const double n1 = static_cast<double>(n_);
  const double inv_n = 1.0 / static_cast<double>(n_ + 1);
  if (order_ == 2) {
    for (std::size_t i = 0; i < count; ++i)
      update2(mean_[i], m2_[i], data[i], n1, inv_n);
  } else {
    for (std::size_t i = 0; i < count; ++i)
      update4(mean_[i], m2_[i], m3_[i], m4_[i], data[i], n1, inv_n);
  }
  ++n_;
}

void MomentAccumulator::add_slice(const Image2D& slice) {
  if (slice.height() != h_ || slice.width() != w_)
    throw ShapeError("slice is " + std::to_string(slice.height()) + "x" +
                     std::to_string(slice.width()) + ", accumulator is " +
                     std::to_string(h_) + "x" + std::to_string(w_));
  add_slice(slice.data().data(), slice.count());
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (h_ != other.h_ || w_ != other.w_ || order_ != other.order_)
    throw ShapeError("cannot merge a " + std::to_string(other.h_) + "x" +
                     std::to_string(other.w_) + " order-" +
                     std::to_string(other.order_) + " accumulator into a " +
                     std::to_string(h_) + "x" + std::to_string(w_) + " order-" +
                     std::to_string(order_) + " one");
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const double inv = 1.0 / n;
  const std::size_t count = mean_.size();
  if (order_ == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double d = other.mean_[i] - mean_[i];
      m2_[i] += other.m2_[i] + d * d * na * nb * inv;
      mean_[i] = (na * mean_[i] + nb * other.mean_[i]) * inv;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const double ma2 = m2_[i], mb2 = other.m2_[i];
      const double ma3 = m3_[i], mb3 = other.m3_[i];
      const double d = other.mean_[i] - mean_[i];
      const double d2 = d * d;
      m4_[i] += other.m4_[i] +
                d2 * d2 * na * nb * (na * na - na * nb + nb * nb) * inv * inv * inv +
                6.0 * d2 * (na * na * mb2 + nb * nb * ma2) * inv * inv +
                4.0 * d * (na * mb3 - nb * ma3) * inv;
      m3_[i] += mb3 + d * d2 * na * nb * (na - nb) * inv * inv +
                3.0 * d * (na * mb2 - nb * ma2) * inv;
      m2_[i] += mb2 + d2 * na * nb * inv;
      mean_[i] = (na * mean_[i] + nb * other.mean_[i]) * inv;
    }
  }
  n_ += other.n_;
}

Image2D MomentAccumulator::mean_image() const {
  Image2D img(h_, w_);
  for (std::size_t i = 0; i < mean_.size(); ++i)
    img.data()[i] = static_cast<float>(mean_[i]);
  return img;
}

Image2D MomentAccumulator::std_image() const {
  Image2D img(h_, w_);
  if (n_ == 0) return img;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < m2_.size(); ++i)
    img.data()[i] =
        static_cast<float>(std::sqrt(std::max(m2_[i], 0.0) * inv_n));
  return img;
}

Image2D MomentAccumulator::skew_image() const {
  if (order_ != 4)
    throw StateError("skewness requires an order-4 accumulator");
  Image2D img(h_, w_);
  if (n_ < 2) return img;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < m2_.size(); ++i) {
    if (m2_[i] <= 0.0) continue;
    const double var = m2_[i] * inv_n;
    img.data()[i] =
        static_cast<float>(m3_[i] * inv_n / (var * std::sqrt(var)));
  }
  return img;
}

Image2D MomentAccumulator::kurt_image() const {
  if (order_ != 4)
    throw StateError("kurtosis requires an order-4 accumulator");
  Image2D img(h_, w_);
  if (n_ < 2) return img;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < m2_.size(); ++i) {
    if (m2_[i] <= 0.0) continue;
    const double var = m2_[i] * inv_n;
    img.data()[i] = static_cast<float>(m4_[i] * inv_n / (var * var) - 3.0);
  }
  return img;
}

// Axis-aware traversals. All three visit the volume in memory order
// (x fastest) while still applying each pixel's updates in ascending
// slice order, so results are bit-equal to slice-by-slice add_slice.
struct MomentKernels {
  static void axial(const Volume3D& vol, MomentAccumulator& acc) {
    const std::size_t pixels = acc.mean_.size();
    const float* v = vol.data().data();
    for (int z = 0; z < vol.dims().nz; ++z)
      acc.add_slice(v + static_cast<std::size_t>(z) * pixels, pixels);
  }

  template <int Order>
  static void coronal(const Volume3D& vol, MomentAccumulator& acc) {
    const Dims3& d = vol.dims();
    const float* v = vol.data().data();
    const std::vector<double> inv = reciprocal_table(d.ny);
    const std::size_t w = static_cast<std::size_t>(d.nx);
    for (int z = 0; z < d.nz; ++z) {
      const std::size_t row = static_cast<std::size_t>(z) * w;
      double* mean = acc.mean_.data() + row;
      double* m2 = acc.m2_.data() + row;
      double* m3 = Order == 4 ? acc.m3_.data() + row : nullptr;
      double* m4 = Order == 4 ? acc.m4_.data() + row : nullptr;
      for (int y = 0; y < d.ny; ++y) {
        const float* src = v + (static_cast<std::size_t>(z) * d.ny + y) * w;
        const double n1 = y;
        const double inv_n = inv[static_cast<std::size_t>(y)];
        if constexpr (Order == 2) {
          for (std::size_t x = 0; x < w; ++x)
            update2(mean[x], m2[x], src[x], n1, inv_n);
        } else {
          for (std::size_t x = 0; x < w; ++x)
            update4(mean[x], m2[x], m3[x], m4[x], src[x], n1, inv_n);
        }
      }
    }
    acc.n_ = d.ny;
  }

  template <int Order>
  static void sagittal(const Volume3D& vol, MomentAccumulator& acc) {
    const Dims3& d = vol.dims();
    const float* v = vol.data().data();
    const std::vector<double> inv = reciprocal_table(d.nx);
    const std::size_t w = static_cast<std::size_t>(d.nx);
    for (int z = 0; z < d.nz; ++z) {
      for (int y = 0; y < d.ny; ++y) {
        const float* src = v + (static_cast<std::size_t>(z) * d.ny + y) * w;
        const std::size_t p = static_cast<std::size_t>(z) * d.ny + y;
        if constexpr (Order == 2) {
          double mean = 0.0, m2 = 0.0;
          for (std::size_t x = 0; x < w; ++x)
            update2(mean, m2, src[x], static_cast<double>(x), inv[x]);
          acc.mean_[p] = mean;
          acc.m2_[p] = m2;
        } else {
          double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
          for (std::size_t x = 0; x < w; ++x)
            update4(mean, m2, m3, m4, src[x], static_cast<double>(x), inv[x]);
          acc.mean_[p] = mean;
          acc.m2_[p] = m2;
          acc.m3_[p] = m3;
          acc.m4_[p] = m4;
        }
      }
    }
    acc.n_ = d.nx;
  }

  template <int Order>
  static MomentAccumulator run(const Volume3D& vol, Plane plane) {
    const Dims3& d = vol.dims();
    if (slice_count(d, plane) < 1)
      throw DimensionError("projection axis for " +
                           std::string(to_string(plane)) +
                           " has no slices, volume dims " + d.str());
    const PlaneImageDims id = plane_image_dims(d, plane);
    MomentAccumulator acc(id.h, id.w, Order);
    switch (plane) {
      case Plane::axial: axial(vol, acc); break;
      case Plane::coronal: coronal<Order>(vol, acc); break;
      case Plane::sagittal: sagittal<Order>(vol, acc); break;
    }
    return acc;
  }
};

MomentImages project_moments(const Volume3D& vol, Plane plane) {
  const MomentAccumulator acc = MomentKernels::run<4>(vol, plane);
  return {acc.mean_image(), acc.std_image(), acc.skew_image(),
          acc.kurt_image()};
}

MeanStdImages project_mean_std(const Volume3D& vol, Plane plane) {
  const MomentAccumulator acc = MomentKernels::run<2>(vol, plane);
  return {acc.mean_image(), acc.std_image()};
}

} // namespace projscan
