#pragma once

#include <span>

#include "sdmtl/tape.hpp"

namespace sdmtl {

/// Stride-1 convolution over the (joint, coordinate) plane with zero "same"
/// padding of (k-1)/2. weight is (outC, inC, k, k) with k odd; bias is
/// (outC, 1, 1, 1). Output dims: (batch, outC, joint, coordinate).
Value conv2d(Tape& tape, Value input, Value weight, Value bias);

Value leaky_relu(Tape& tape, Value x, float slope = 0.2f);

/// Logistic sigmoid, clamped into the open interval (0,1) so saturated
/// float32 outputs never round to exactly 0 or 1.
Value sigmoid(Tape& tape, Value x);

Value add(Tape& tape, Value a, Value b);
Value sub(Tape& tape, Value a, Value b);
Value mul(Tape& tape, Value a, Value b);
Value scale(Tape& tape, Value x, float s);

/// Concatenates along the channel axis; operands must agree on all other dims.
Value concat_channels(Tape& tape, std::span<const Value> parts);

/// x: (B, in, 1, 1), weight: (out, in, 1, 1), bias: (out, 1, 1, 1) -> (B, out, 1, 1).
Value fully_connected(Tape& tape, Value x, Value weight, Value bias);

/// (B, C, J, D) -> (B, C*J*D, 1, 1), preserving element order.
Value flatten_features(Tape& tape, Value x);

/// out[b,...] = sum_l weights[b,l] * features[l][b,...].
/// weights: (B, L, 1, 1); every feature: (B, C, J, D).
Value weighted_sum(Tape& tape, std::span<const Value> features, Value weights);

/// Sum of all elements as a (1,1,1,1) scalar. Accumulates in double.
Value sum_all(Tape& tape, Value x);
Value mean_all(Tape& tape, Value x);

}  // namespace sdmtl
