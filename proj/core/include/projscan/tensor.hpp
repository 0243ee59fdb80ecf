#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace projscan {

/// Dense float tensor of rank 1 to 4 with NCHW semantics at rank 4 and
/// an optional same-shape gradient buffer. Zero-length dims are allowed
/// (a bias-only dense layer has a (out, 0) weight); negative dims are
/// not. Layout is row-major, last dim fastest.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_.size(); }
  std::string shape_str() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool has_grad() const { return grad_.size() == data_.size() && !shape_.empty(); }
  std::vector<float>& grad();
  const std::vector<float>& grad() const;
  void ensure_grad();
  void zero_grad();

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
};

} // namespace projscan
