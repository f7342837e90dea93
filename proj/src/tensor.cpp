#include "sdmtl/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace sdmtl {

std::string shape_str(const Shape4& s) {
  return "(" + std::to_string(s.b) + "," + std::to_string(s.c) + "," + std::to_string(s.j) + "," +
         std::to_string(s.d) + ")";
}

std::string Shape4::str() const { return shape_str(*this); }

std::size_t Tensor::check_count(Shape4 shape) {
  if (shape.b < 0 || shape.c < 0 || shape.j < 0 || shape.d < 0) {
    throw ShapeError("tensor dims must be non-negative, got " + shape_str(shape));
  }
  return static_cast<std::size_t>(shape.count());
}

Tensor::Tensor(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != check_count(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                     shape_str(shape));
  }
}

Tensor Tensor::full(Shape4 shape, float v) {
  Tensor t(shape);
  t.fill(v);
  return t;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

float Tensor::scalar_value() const {
  if (!shape_.is_scalar()) {
    throw ContractError("scalar_value called on non-scalar tensor " + shape_str(shape_));
  }
  return data_[0];
}

}  // namespace sdmtl
