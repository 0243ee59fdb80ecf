#include "projscan/tensor.hpp"

#include "projscan/errors.hpp"

namespace projscan {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 4)
    throw ShapeError("tensor rank must be 1..4, got " +
                     std::to_string(shape_.size()));
  std::size_t count = 1;
  for (int d : shape_) {
    if (d < 0) throw ShapeError("negative tensor dim in " + shape_str());
    count *= static_cast<std::size_t>(d);
  }
  data_.assign(count, 0.0f);
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

std::vector<float>& Tensor::grad() {
  if (!has_grad()) throw StateError("tensor " + shape_str() + " has no gradient");
  return grad_;
}

const std::vector<float>& Tensor::grad() const {
  if (!has_grad()) throw StateError("tensor " + shape_str() + " has no gradient");
  return grad_;
}

void Tensor::ensure_grad() {
  if (!has_grad()) grad_.assign(data_.size(), 0.0f);
}

void Tensor::zero_grad() {
  if (has_grad()) grad_.assign(grad_.size(), 0.0f);
}

} // namespace projscan
