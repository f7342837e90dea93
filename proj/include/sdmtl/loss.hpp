#pragma once

#include <span>
#include <vector>

#include "sdmtl/tape.hpp"

namespace sdmtl {

enum class WeightVariant { exp, linear, uniform };

WeightVariant weight_variant_from_name(const std::string& name);
std::string weight_variant_name(WeightVariant v);

/// Per-step loss weights, normalized to sum 1.
struct LossWeights {
  std::vector<float> w;
  float alpha = 0.0f;
};

/// exp: w_i proportional to e^(-alpha*i); linear: proportional to
/// (T_out - i + 1); uniform: 1/T_out. i runs 1..T_out.
LossWeights temporal_weights(int t_out, float alpha, WeightVariant variant);

/// Temporally weighted squared position error:
///   (1/N_j) * sum_i w_i * sum_j |J_j^i - Jhat_j^i|^2,
/// averaged over the batch. pred and gt are T_out values of dims
/// (B, 1, N_j, 3). Differentiable.
Value tw_mpjpe_loss(Tape& tape, std::span<const Value> pred, std::span<const Value> gt,
                    const LossWeights& weights);

/// Mean over joints of Euclidean distance (mm) at a 1-based output frame.
/// pred/gt hold T_out poses of N_j*3 floats each.
double mpjpe(std::span<const std::vector<float>> pred, std::span<const std::vector<float>> gt,
             int horizon_frame);

/// Repeats the last observed pose.
std::vector<std::vector<float>> zero_velocity_baseline(std::span<const std::vector<float>> window,
                                                       int t_out);

/// Extrapolates the last frame-to-frame displacement linearly.
std::vector<std::vector<float>> constant_velocity_baseline(std::span<const std::vector<float>> window,
                                                           int t_out);

}  // namespace sdmtl
