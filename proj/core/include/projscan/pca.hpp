#pragma once

#include <vector>

#include "projscan/image.hpp"
#include "projscan/volume.hpp"

namespace projscan {

/// Eigendecomposition of a dense symmetric matrix, values sorted
/// non-increasing. vectors is row-major with the k-th eigenvector in
/// row k; rows are orthonormal.
struct SymmetricEigen {
  std::vector<double> values;
  std::vector<double> vectors;
  int n = 0;

  double vector_at(int k, int i) const {
    return vectors[static_cast<std::size_t>(k) * n + i];
  }
};

/// Cyclic Jacobi rotations on a row-major n×n symmetric matrix. Only
/// the values actually stored are read, so minor asymmetry from
/// accumulation rounding is tolerated. Intended for the slice-Gram
/// matrices here (n ≤ a few hundred), not large-scale use.
SymmetricEigen jacobi_eigen(std::vector<double> a, int n);

struct EigenSlices {
  std::vector<Image2D> images;
  std::vector<double> explained_variance;
};

/// Top-k principal directions of the volume's slices along the plane's
/// stacking axis. Each flattened slice is one observation; observations
/// are mean-centered, and the decomposition runs on the n×n slice Gram
/// matrix rather than the pixel×pixel covariance. Returned images are
/// unit-norm with sign fixed so the largest-magnitude pixel is positive,
/// in non-increasing explained-variance order; explained_variance[k] is
/// the fraction of total variance in [0,1]. A (near-)constant volume has
/// no variance to decompose and yields all-zero images with explained
/// variance 0. Requires 1 ≤ k ≤ slice count, else ParameterError.
EigenSlices eigen_slices(const Volume3D& vol, Plane plane, int k);

} // namespace projscan
