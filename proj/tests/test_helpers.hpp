#pragma once

#include "sdmtl/rng.hpp"
#include "sdmtl/tensor.hpp"

namespace sdmtl::test {

inline Tensor uniform_tensor(Shape4 shape, std::uint64_t seed, const std::string& name,
                             float lo = -1.0f, float hi = 1.0f) {
  SeededStream rng(seed, name);
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return worst;
}

}  // namespace sdmtl::test
