#include "projscan/gemm.hpp"

#include <cstring>

namespace projscan {

void gemm_f32(int m, int n, int k, const float* a, const float* b, float* c,
              bool accumulate) {
  const std::size_t nn = static_cast<std::size_t>(n);
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * nn;
    if (!accumulate) std::memset(crow, 0, nn * sizeof(float));
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<std::size_t>(kk) * nn;
      for (std::size_t j = 0; j < nn; ++j) crow[j] += av * brow[j];
    }
  }
}

void transpose_f32(const float* a, int m, int n, float* out) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] =
          a[static_cast<std::size_t>(i) * n + j];
}

} // namespace projscan
