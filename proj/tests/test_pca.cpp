#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "projscan/errors.hpp"
#include "projscan/pca.hpp"
#include "projscan/rng.hpp"
#include "support.hpp"

using namespace projscan;

namespace {

std::vector<double> random_symmetric(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a[static_cast<std::size_t>(i) * n + j] = v;
      a[static_cast<std::size_t>(j) * n + i] = v;
    }
  return a;
}

} // namespace

TEST_CASE("jacobi solves a known 2x2") {
  const SymmetricEigen e = jacobi_eigen({2.0, 1.0, 1.0, 2.0}, 2);
  REQUIRE(e.values.size() == 2);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(e.vector_at(0, 0) * r + e.vector_at(0, 1) * r) ==
        doctest::Approx(1.0));
  CHECK(std::abs(e.vector_at(1, 0) * r - e.vector_at(1, 1) * r) ==
        doctest::Approx(1.0));
}

TEST_CASE("jacobi on a diagonal matrix returns it sorted") {
  const SymmetricEigen e =
      jacobi_eigen({1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0}, 3);
  CHECK(e.values[0] == doctest::Approx(5.0));
  CHECK(e.values[1] == doctest::Approx(3.0));
  CHECK(e.values[2] == doctest::Approx(1.0));
  CHECK(std::abs(e.vector_at(0, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vector_at(1, 2)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vector_at(2, 0)) == doctest::Approx(1.0));
}

TEST_CASE("jacobi matches a dense library solver on random matrices") {
  for (uint64_t seed : {10ull, 11ull, 12ull}) {
    const int n = 12;
    const std::vector<double> a = random_symmetric(n, seed);
    const SymmetricEigen mine = jacobi_eigen(a, n);

    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m(i, j) = a[static_cast<std::size_t>(i) * n + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    REQUIRE(solver.info() == Eigen::Success);

    for (int k = 0; k < n; ++k) {
      // library results come sorted ascending
      const double ref = solver.eigenvalues()(n - 1 - k);
      REQUIRE(mine.values[static_cast<std::size_t>(k)] ==
              doctest::Approx(ref).epsilon(1e-9).scale(1e-9));

      const Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - k);
      double dot = 0.0, norm = 0.0;
      for (int i = 0; i < n; ++i) {
        dot += mine.vector_at(k, i) * v(i);
        norm += mine.vector_at(k, i) * mine.vector_at(k, i);
      }
      REQUIRE(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
      REQUIRE(norm == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("jacobi input validation") {
  CHECK_THROWS_AS(jacobi_eigen({}, 0), ParameterError);
  CHECK_THROWS_AS(jacobi_eigen({1.0, 2.0}, 2), ShapeError);
}

TEST_CASE("rank-1 volume concentrates all variance in one component") {
  const int n = 5;
  Volume3D vol = Volume3D::zeros({4, 3, n});
  Rng rng(21);
  std::vector<float> pattern(12);
  for (auto& v : pattern) v = rng.uniform_f(-1.0f, 1.0f);
  const float coeff[n] = {0.5f, 2.0f, -1.0f, 3.0f, 0.0f};
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x)
        vol.at(x, y, z) = coeff[z] * pattern[static_cast<std::size_t>(y) * 4 + x];

  const EigenSlices es = eigen_slices(vol, Plane::axial, 2);
  REQUIRE(es.images.size() == 2);
  CHECK(es.explained_variance[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(es.explained_variance[1] == doctest::Approx(0.0).scale(1).epsilon(1e-9));

  // first component is the (normalized) pattern up to sign
  double pnorm = 0.0, dot = 0.0;
  for (float v : pattern) pnorm += static_cast<double>(v) * v;
  pnorm = std::sqrt(pnorm);
  for (std::size_t p = 0; p < pattern.size(); ++p)
    dot += es.images[0].data()[p] * (pattern[p] / pnorm);
  CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-6));

  // sign convention: the strongest pixel is positive
  float peak = 0.0f;
  for (float v : es.images[0].data())
    if (std::abs(v) > std::abs(peak)) peak = v;
  CHECK(peak > 0.0f);

  // second component has nothing left to explain
  for (float v : es.images[1].data()) CHECK(v == 0.0f);
}

TEST_CASE("constant volume yields zero eigen slices by convention") {
  Volume3D vol({3, 3, 4}, std::vector<float>(36, 2.5f));
  const EigenSlices es = eigen_slices(vol, Plane::axial, 3);
  for (const Image2D& img : es.images)
    for (float v : img.data()) CHECK(v == 0.0f);
  for (double ev : es.explained_variance) CHECK(ev == 0.0);
}

TEST_CASE("eigen slices match a dense decomposition of the slice gram") {
  Volume3D vol = testsupport::random_volume({4, 4, 3}, 91, -1.0f, 1.0f);
  const Plane plane = Plane::axial;
  const int n = 3;
  const std::size_t pixels = 16;

  // oracle: centered slices, gram, dense eigensolver, back-projection
  Eigen::MatrixXd x(n, static_cast<int>(pixels));
  for (int i = 0; i < n; ++i) {
    const Image2D s = extract_slice(vol, plane, i);
    for (std::size_t p = 0; p < pixels; ++p)
      x(i, static_cast<int>(p)) = s.data()[p];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  REQUIRE(solver.info() == Eigen::Success);

  const EigenSlices es = eigen_slices(vol, plane, 2);
  const double trace = gram.trace();
  for (int k = 0; k < 2; ++k) {
    const double lambda = solver.eigenvalues()(n - 1 - k);
    REQUIRE(es.explained_variance[static_cast<std::size_t>(k)] ==
            doctest::Approx(lambda / trace).epsilon(1e-9));

    Eigen::VectorXd dir = x.transpose() * solver.eigenvectors().col(n - 1 - k);
    dir.normalize();
    int peak = 0;
    for (int p = 1; p < dir.size(); ++p)
      if (std::abs(dir(p)) > std::abs(dir(peak))) peak = p;
    if (dir(peak) < 0.0) dir = -dir;

    for (std::size_t p = 0; p < pixels; ++p)
      REQUIRE(std::abs(es.images[static_cast<std::size_t>(k)].data()[p] -
                       dir(static_cast<int>(p))) <= 1e-6);
  }
}

TEST_CASE("eigen slice images are orthonormal") {
  Volume3D vol = testsupport::random_volume({6, 5, 7}, 44);
  for (Plane plane : kCanonicalPlanes) {
    const int k = 3;
    const EigenSlices es = eigen_slices(vol, plane, k);

    REQUIRE(std::is_sorted(es.explained_variance.rbegin(),
                           es.explained_variance.rend()));
    double total = 0.0;
    for (double ev : es.explained_variance) {
      CHECK(ev >= 0.0);
      CHECK(ev <= 1.0);
      total += ev;
    }
    CHECK(total <= 1.0 + 1e-9);

    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t p = 0; p < es.images[0].count(); ++p)
          dot += static_cast<double>(es.images[static_cast<std::size_t>(i)].data()[p]) *
                 es.images[static_cast<std::size_t>(j)].data()[p];
        if (i == j) CHECK(dot == doctest::Approx(1.0).epsilon(1e-6));
        else CHECK(std::abs(dot) <= 1e-6);
      }
  }
}

TEST_CASE("component count is range-checked") {
  Volume3D vol = testsupport::random_volume({4, 4, 4}, 1);
  CHECK_THROWS_AS(eigen_slices(vol, Plane::axial, 0), ParameterError);
  CHECK_THROWS_AS(eigen_slices(vol, Plane::axial, 5), ParameterError);
  CHECK_NOTHROW(eigen_slices(vol, Plane::axial, 4));
}
