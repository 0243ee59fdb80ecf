#pragma once

#include <cstdint>
#include <vector>

#include "projscan/layers.hpp"

namespace projscan {

struct AdamConfig {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a parameter set. Per element:
///   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
///   w -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// with eps added outside the square root. Moment buffers are float32;
/// the per-step bias corrections are computed in double. Duplicate
/// ParamPtr entries (weight-tied layers) are collapsed so each tensor
/// is stepped once per call.
class Adam {
 public:
  explicit Adam(std::vector<ParamPtr> params, AdamConfig cfg = {});

  /// One update from the currently accumulated gradients, which are
  /// then reset to zero: backward passes accumulate (+=) so weight-tied
  /// layers sum their contributions, and step() consumes the total.
  /// Increments t first, even when all gradients are zero. A non-finite
  /// gradient aborts with DivergenceError naming the parameter.
  void step();

  void zero_grad();

  std::int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::vector<ParamPtr> params_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t t_ = 0;
};

} // namespace projscan
