#include "projscan/loss.hpp"

#include "projscan/errors.hpp"

namespace projscan {

namespace {

void check_pair(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw ShapeError("mse: prediction " + pred.shape_str() + " vs target " +
                     target.shape_str());
  if (pred.numel() == 0) throw ParameterError("mse over empty tensors");
}

} // namespace

double mse_loss(const Tensor& pred, const Tensor& target) {
  check_pair(pred, target);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d =
        static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(pred.numel());
}

double mse_loss_with_grad(const Tensor& pred, const Tensor& target,
                          Tensor& dpred) {
  check_pair(pred, target);
  dpred = Tensor(pred.shape());
  const double inv_n = 1.0 / static_cast<double>(pred.numel());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d =
        static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
    sum += d * d;
    dpred.data()[i] = static_cast<float>(2.0 * d * inv_n);
  }
  return sum * inv_n;
}

} // namespace projscan
