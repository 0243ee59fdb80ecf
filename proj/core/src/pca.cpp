#include "projscan/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

double off_diagonal_norm(const std::vector<double>& a, int n) {
  double sum = 0.0;
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      const double v = a[static_cast<std::size_t>(p) * n + q];
      sum += v * v;
    }
  return std::sqrt(sum);
}

} // namespace

SymmetricEigen jacobi_eigen(std::vector<double> a, int n) {
  if (n <= 0) throw ParameterError("matrix order must be positive");
  if (a.size() != static_cast<std::size_t>(n) * n)
    throw ShapeError("matrix payload has " + std::to_string(a.size()) +
                     " values, order " + std::to_string(n) + " requires " +
                     std::to_string(static_cast<std::size_t>(n) * n));

  auto at = [&a, n](int r, int c) -> double& {
    return a[static_cast<std::size_t>(r) * n + c];
  };

  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(at(i, i)));
  scale = std::max(scale, off_diagonal_norm(a, n));
  const double tol = (scale > 0.0 ? scale : 1.0) * 1e-14;

  for (int sweep = 0; sweep < 64; ++sweep) {
    if (off_diagonal_norm(a, n) <= tol) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) <= tol * 1e-3) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int i = 0; i < n; ++i) {
          const double aip = at(i, p);
          const double aiq = at(i, q);
          at(i, p) = c * aip - s * aiq;
          at(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = at(p, i);
          const double aqi = at(q, i);
          at(p, i) = c * api - s * aqi;
          at(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const std::size_t ip = static_cast<std::size_t>(i) * n + p;
          const std::size_t iq = static_cast<std::size_t>(i) * n + q;
          const double vip = v[ip];
          const double viq = v[iq];
          v[ip] = c * vip - s * viq;
          v[iq] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return at(x, x) > at(y, y); });

  SymmetricEigen result;
  result.n = n;
  result.values.resize(static_cast<std::size_t>(n));
  result.vectors.resize(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    result.values[static_cast<std::size_t>(k)] = at(src, src);
    for (int i = 0; i < n; ++i)
      result.vectors[static_cast<std::size_t>(k) * n + i] =
          v[static_cast<std::size_t>(i) * n + src];
  }
  return result;
}

EigenSlices eigen_slices(const Volume3D& vol, Plane plane, int k) {
  const Dims3& d = vol.dims();
  const int n = slice_count(d, plane);
  if (k < 1 || k > n)
    throw ParameterError("component count " + std::to_string(k) +
                         " out of range [1, " + std::to_string(n) + "] for " +
                         std::string(to_string(plane)) + " of " + d.str());

  const PlaneImageDims id = plane_image_dims(d, plane);
  const std::size_t pixels =
      static_cast<std::size_t>(id.h) * static_cast<std::size_t>(id.w);

  // Centered observations, one row per slice, in double so the Gram
  // entries and back-projection share one exact representation.
  std::vector<double> x(static_cast<std::size_t>(n) * pixels);
  for (int i = 0; i < n; ++i) {
    const Image2D slice = extract_slice(vol, plane, i);
    double* row = x.data() + static_cast<std::size_t>(i) * pixels;
    for (std::size_t p = 0; p < pixels; ++p) row[p] = slice.data()[p];
  }
  for (std::size_t p = 0; p < pixels; ++p) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += x[static_cast<std::size_t>(i) * pixels + p];
    m /= n;
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i) * pixels + p] -= m;
  }

  std::vector<double> gram(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* ri = x.data() + static_cast<std::size_t>(i) * pixels;
    for (int j = i; j < n; ++j) {
      const double* rj = x.data() + static_cast<std::size_t>(j) * pixels;
      double dot = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) dot += ri[p] * rj[p];
      gram[static_cast<std::size_t>(i) * n + j] = dot;
      gram[static_cast<std::size_t>(j) * n + i] = dot;
    }
  }

  EigenSlices out;
  out.images.assign(static_cast<std::size_t>(k), Image2D(id.h, id.w));
  out.explained_variance.assign(static_cast<std::size_t>(k), 0.0);

  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += gram[static_cast<std::size_t>(i) * n + i];
  if (!(trace > 0.0)) return out; // no variance at all: zero by convention

  const SymmetricEigen eig = jacobi_eigen(gram, n);
  const double lead = std::max(eig.values[0], 0.0);
  for (int c = 0; c < k; ++c) {
    const double lambda = eig.values[static_cast<std::size_t>(c)];
    out.explained_variance[static_cast<std::size_t>(c)] =
        std::clamp(lambda / trace, 0.0, 1.0);
    if (lambda <= 0.0 || lambda <= lead * 1e-12) continue; // null direction

    std::vector<double> dir(pixels, 0.0);
    for (int i = 0; i < n; ++i) {
      const double u = eig.vector_at(c, i);
      const double* row = x.data() + static_cast<std::size_t>(i) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) dir[p] += u * row[p];
    }
    double norm2 = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) norm2 += dir[p] * dir[p];
    if (!(norm2 > 0.0)) continue;
    double inv_norm = 1.0 / std::sqrt(norm2);

    std::size_t peak = 0;
    double peak_abs = -1.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      const double mag = std::abs(dir[p]);
      if (mag > peak_abs) {
        peak_abs = mag;
        peak = p;
      }
    }
    if (dir[peak] < 0.0) inv_norm = -inv_norm;

    Image2D& img = out.images[static_cast<std::size_t>(c)];
    for (std::size_t p = 0; p < pixels; ++p)
      img.data()[p] = static_cast<float>(dir[p] * inv_norm);
  }
  return out;
}

} // namespace projscan
