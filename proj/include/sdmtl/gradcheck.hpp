#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdmtl/tape.hpp"

namespace sdmtl {

/// Named handle to a checkable parameter tensor.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Builds a scalar loss from the current parameter values on a fresh tape.
/// Must be deterministic; parameters are read through the binder so that
/// in-place perturbations are observed.
using LossBuilder = std::function<Value(Tape&, Binder&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_coord;  // "param[i]"
  int coords_checked = 0;
  int coords_skipped = 0;  // straddled an activation kink; no derivative there

  bool passes(double tol = 1e-3) const { return max_rel_err < tol; }
};

/// Central-difference check of the tape gradients. Perturbs one coordinate
/// at a time by +-eps and compares (f+ - f-) / (p+ - p-) against the
/// analytic gradient, reporting max |analytic - numeric| /
/// max(1, |analytic|, |numeric|). When a parameter has more coordinates
/// than max_coords_per_param, a deterministic seeded subsample is checked.
///
/// The network is piecewise linear in its parameters wherever a Leaky ReLU
/// input changes sign inside the perturbation interval, and a central
/// difference estimates no derivative across such a kink. Coordinates whose
/// forward and backward one-sided differences disagree by more than the
/// contamination a passing coordinate could carry are excluded and counted
/// in coords_skipped; more than ~5% exclusions raises NumericError.
GradCheckReport grad_check(std::span<const ParamRef> params, const LossBuilder& build, double eps,
                           std::uint64_t seed, int max_coords_per_param = 0);

}  // namespace sdmtl
