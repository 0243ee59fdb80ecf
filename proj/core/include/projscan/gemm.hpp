#pragma once

namespace projscan {

/// C(M×N) = A(M×K)·B(K×N), row-major, optionally accumulating into the
/// existing C. Every output element sums its K terms in ascending-k
/// order with one fused multiply-add each, so results are bit-stable
/// across vector widths and identical no matter how callers partition
/// work, as long as partitions own disjoint C rows.
void gemm_f32(int m, int n, int k, const float* a, const float* b, float* c,
              bool accumulate = false);

/// out(N×M) = transpose of a(M×N), row-major.
void transpose_f32(const float* a, int m, int n, float* out);

} // namespace projscan
