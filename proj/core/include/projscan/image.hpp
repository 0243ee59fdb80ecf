#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "projscan/errors.hpp"

namespace projscan {

// Dense row-major 2D float image, index = y * width + x.
class Image2D {
 public:
  Image2D() = default;
  Image2D(int height, int width)
      : h_(height), w_(width), data_(checked_count(height, width), 0.0f) {}
  Image2D(int height, int width, std::vector<float> data)
      : h_(height), w_(width), data_(std::move(data)) {
    if (data_.size() != checked_count(height, width))
      throw ShapeError("image payload has " + std::to_string(data_.size()) +
                       " values, dims " + std::to_string(height) + "x" +
                       std::to_string(width) + " require " +
                       std::to_string(static_cast<std::size_t>(height) * width));
  }

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t count() const { return data_.size(); }

  float& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  float at(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Image2D& other) const {
    return h_ == other.h_ && w_ == other.w_;
  }

 private:
  static std::size_t checked_count(int height, int width) {
    if (height <= 0 || width <= 0)
      throw ShapeError("image dims must be positive, got " +
                       std::to_string(height) + "x" + std::to_string(width));
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }

  int h_ = 0;
  int w_ = 0;
  std::vector<float> data_;
};

} // namespace projscan
