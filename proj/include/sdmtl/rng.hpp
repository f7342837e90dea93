#pragma once

#include <cstdint>
#include <string_view>

#include "sdmtl/tensor.hpp"

namespace sdmtl {

/// Deterministic splitmix64 stream keyed by (seed, name). Distributions are
/// implemented in-house so values are bit-identical across platforms and
/// standard libraries.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed, std::string_view name = {});

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_unit();
  float next_uniform(float lo, float hi);
  /// Standard normal via Box-Muller.
  float next_normal();
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  float spare_ = 0.0f;
};

/// Zero-mean normal tensor scaled by sqrt(2 / fan_in), bit-identical for a
/// given (seed, name, shape).
Tensor seeded_init(Shape4 shape, int fan_in, std::uint64_t seed, std::string_view name);

}  // namespace sdmtl
