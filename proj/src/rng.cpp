#include "sdmtl/rng.hpp"

#include <cmath>
#include <numbers>

namespace sdmtl {
namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

SeededStream::SeededStream(std::uint64_t seed, std::string_view name) {
  std::uint64_t s = seed;
  state_ = splitmix64(s) ^ fnv1a64(name);
  // burn one output so nearby seeds decorrelate
  splitmix64(state_);
}

std::uint64_t SeededStream::next_u64() { return splitmix64(state_); }

double SeededStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float SeededStream::next_uniform(float lo, float hi) {
  return lo + static_cast<float>(next_unit()) * (hi - lo);
}

float SeededStream::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = static_cast<float>(r * std::sin(a));
  has_spare_ = true;
  return static_cast<float>(r * std::cos(a));
}

std::uint64_t SeededStream::next_below(std::uint64_t n) {
  if (n == 0) throw ContractError("next_below: n must be positive");
  return next_u64() % n;
}

Tensor seeded_init(Shape4 shape, int fan_in, std::uint64_t seed, std::string_view name) {
  if (fan_in <= 0) throw ConfigError("seeded_init: fan_in must be positive");
  SeededStream s(seed, name);
  const float sigma = std::sqrt(2.0f / static_cast<float>(fan_in));
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = sigma * s.next_normal();
  return t;
}

}  // namespace sdmtl
