#pragma once

#include "projscan/tensor.hpp"

namespace projscan {

/// Mean over all elements of (pred - target)^2, accumulated in double.
/// Shapes must match exactly; empty tensors are rejected.
double mse_loss(const Tensor& pred, const Tensor& target);

/// mse_loss plus its gradient: dpred is replaced by a tensor of pred's
/// shape holding dL/dpred = 2*(pred - target)/N.
double mse_loss_with_grad(const Tensor& pred, const Tensor& target,
                          Tensor& dpred);

} // namespace projscan
