#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "projscan/image.hpp"
#include "projscan/volume.hpp"

namespace projscan {

/// Streaming per-pixel central moments over a stack of equally shaped
/// slices. Order 4 tracks mean and M2..M4 (std, skewness, kurtosis);
/// order 2 tracks mean and M2 only and is cheaper. Updates use the
/// numerically stable incremental recurrences, so a slice never has to
/// be revisited. Merging two accumulators built from disjoint slice
/// ranges gives the same result as one sequential pass (up to rounding).
class MomentAccumulator {
 public:
  MomentAccumulator(int height, int width, int order = 4);

  /// Folds one slice in. `count` must equal height*width.
  void add_slice(const float* data, std::size_t count);
  void add_slice(const Image2D& slice);

  /// Folds another accumulator of identical shape/order in, as if its
  /// slices had been added after this one's.
  void merge(const MomentAccumulator& other);

  std::int64_t n() const { return n_; }
  int order() const { return order_; }
  int height() const { return h_; }
  int width() const { return w_; }

  /// Population statistics. With n = 0 mean and std finalize to zero;
  /// a pixel with n < 2 or M2 = 0 has skew = kurt = 0 so constant
  /// columns (e.g. padding) stay finite. Kurtosis is excess (Gaussian
  /// maps to 0). skew/kurt require order 4.
  Image2D mean_image() const;
  Image2D std_image() const;
  Image2D skew_image() const;
  Image2D kurt_image() const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& m2() const { return m2_; }
  const std::vector<double>& m3() const { return m3_; }
  const std::vector<double>& m4() const { return m4_; }

 private:
  int h_;
  int w_;
  int order_;
  std::int64_t n_ = 0;
  std::vector<double> mean_, m2_, m3_, m4_;

  friend struct MomentKernels;
};

struct MomentImages {
  Image2D mean, std, skew, kurt;
};

struct MeanStdImages {
  Image2D mean, std;
};

/// Per-pixel mean/std/skew/kurt across the volume's slices along the
/// plane's stacking axis, one streaming pass over the voxels. Bit-equal
/// to extracting each slice and feeding an order-4 MomentAccumulator in
/// ascending slice order.
MomentImages project_moments(const Volume3D& vol, Plane plane);

/// Mean/std only; same traversal with the order-2 update.
MeanStdImages project_mean_std(const Volume3D& vol, Plane plane);

} // namespace projscan
