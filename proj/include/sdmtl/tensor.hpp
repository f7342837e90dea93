#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdmtl/errors.hpp"

namespace sdmtl {

/// Dimensions of a rank-4 tensor, laid out (batch, channel, joint, coordinate).
struct Shape4 {
  int b = 0;
  int c = 0;
  int j = 0;
  int d = 0;

  std::int64_t count() const {
    return static_cast<std::int64_t>(b) * c * j * d;
  }
  bool operator==(const Shape4&) const = default;
  bool is_scalar() const { return b == 1 && c == 1 && j == 1 && d == 1; }
  std::string str() const;
};

/// Dense rank-4 float32 tensor, row-major in (b, c, j, d) order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape) : shape_(shape), data_(check_count(shape), 0.0f) {}
  Tensor(Shape4 shape, std::vector<float> data);

  static Tensor zeros(Shape4 shape) { return Tensor(shape); }
  static Tensor full(Shape4 shape, float v);
  static Tensor scalar(float v) { return full({1, 1, 1, 1}, v); }

  const Shape4& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  std::int64_t index(int b, int c, int j, int d) const {
    return ((static_cast<std::int64_t>(b) * shape_.c + c) * shape_.j + j) * shape_.d + d;
  }
  float& at(int b, int c, int j, int d) { return data_[static_cast<std::size_t>(index(b, c, j, d))]; }
  float at(int b, int c, int j, int d) const { return data_[static_cast<std::size_t>(index(b, c, j, d))]; }

  void fill(float v);
  bool all_finite() const;
  float scalar_value() const;

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  static std::size_t check_count(Shape4 shape);

  Shape4 shape_{};
  std::vector<float> data_;
};

std::string shape_str(const Shape4& s);

}  // namespace sdmtl
