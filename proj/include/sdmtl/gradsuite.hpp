#pragma once

#include <string>
#include <vector>

#include "sdmtl/gradcheck.hpp"

namespace sdmtl {

struct GradSuiteEntry {
  std::string component;
  GradCheckReport report;
};

/// Central-difference checks for each block type, the trajectory feature,
/// the aggregation, the decoders, the loss, and the full model on a small
/// configuration. Deterministic per seed. exhaustive checks every
/// coordinate instead of a seeded subsample.
std::vector<GradSuiteEntry> run_grad_suite(std::uint64_t seed, bool exhaustive = false);

}  // namespace sdmtl
