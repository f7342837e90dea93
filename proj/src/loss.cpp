#include "sdmtl/loss.hpp"

#include <cmath>

#include "sdmtl/ops.hpp"

namespace sdmtl {

WeightVariant weight_variant_from_name(const std::string& name) {
  if (name == "exp") return WeightVariant::exp;
  if (name == "linear") return WeightVariant::linear;
  if (name == "uniform") return WeightVariant::uniform;
  throw ConfigError("unknown loss variant '" + name + "' (expected exp, linear or uniform)");
}

std::string weight_variant_name(WeightVariant v) {
  switch (v) {
    case WeightVariant::exp: return "exp";
    case WeightVariant::linear: return "linear";
    case WeightVariant::uniform: return "uniform";
  }
  throw ContractError("invalid weight variant");
}

LossWeights temporal_weights(int t_out, float alpha, WeightVariant variant) {
  if (t_out < 1) throw ConfigError("temporal_weights: t_out must be >= 1, got " + std::to_string(t_out));
  LossWeights lw;
  lw.alpha = alpha;
  lw.w.resize(static_cast<std::size_t>(t_out));
  double sum = 0.0;
  for (int i = 1; i <= t_out; ++i) {
    double v = 0.0;
    switch (variant) {
      case WeightVariant::exp: v = std::exp(-static_cast<double>(alpha) * i); break;
      case WeightVariant::linear: v = static_cast<double>(t_out - i + 1); break;
      case WeightVariant::uniform: v = 1.0; break;
    }
    lw.w[static_cast<std::size_t>(i - 1)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : lw.w) v = static_cast<float>(v / sum);
  return lw;
}

Value tw_mpjpe_loss(Tape& tape, std::span<const Value> pred, std::span<const Value> gt,
                    const LossWeights& weights) {
  if (pred.size() != gt.size() || pred.size() != weights.w.size()) {
    throw ShapeError("tw_mpjpe_loss: got " + std::to_string(pred.size()) + " predictions, " +
                     std::to_string(gt.size()) + " targets, " + std::to_string(weights.w.size()) +
                     " weights");
  }
  const Shape4 ps = tape.value(pred[0]).shape();
  const float norm = 1.0f / (static_cast<float>(ps.j) * static_cast<float>(ps.b));
  Value loss;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (tape.value(pred[i]).shape() != tape.value(gt[i]).shape()) {
      throw ShapeError("tw_mpjpe_loss: step " + std::to_string(i + 1) + " dims " +
                       shape_str(tape.value(pred[i]).shape()) + " vs " +
                       shape_str(tape.value(gt[i]).shape()));
    }
    Value diff = sub(tape, pred[i], gt[i]);
    Value term = scale(tape, sum_all(tape, mul(tape, diff, diff)), weights.w[i] * norm);
    loss = loss.valid() ? add(tape, loss, term) : term;
  }
  return loss;
}

double mpjpe(std::span<const std::vector<float>> pred, std::span<const std::vector<float>> gt,
             int horizon_frame) {
  if (pred.size() != gt.size()) {
    throw ShapeError("mpjpe: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(gt.size()) + " targets");
  }
  if (horizon_frame < 1 || horizon_frame > static_cast<int>(pred.size())) {
    throw ContractError("mpjpe: horizon frame " + std::to_string(horizon_frame) +
                        " outside 1.." + std::to_string(pred.size()));
  }
  const auto& p = pred[static_cast<std::size_t>(horizon_frame - 1)];
  const auto& g = gt[static_cast<std::size_t>(horizon_frame - 1)];
  if (p.size() != g.size() || p.size() % 3 != 0 || p.empty()) {
    throw ShapeError("mpjpe: pose sizes " + std::to_string(p.size()) + " vs " + std::to_string(g.size()));
  }
  const std::size_t n_j = p.size() / 3;
  double acc = 0.0;
  for (std::size_t j = 0; j < n_j; ++j) {
    double sq = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      const double diff = static_cast<double>(p[3 * j + d]) - g[3 * j + d];
      sq += diff * diff;
    }
    acc += std::sqrt(sq);
  }
  return acc / static_cast<double>(n_j);
}

std::vector<std::vector<float>> zero_velocity_baseline(std::span<const std::vector<float>> window,
                                                       int t_out) {
  if (window.empty()) throw ContractError("zero_velocity_baseline: empty window");
  return std::vector<std::vector<float>>(static_cast<std::size_t>(t_out), window.back());
}

std::vector<std::vector<float>> constant_velocity_baseline(std::span<const std::vector<float>> window,
                                                           int t_out) {
  if (window.size() < 2) throw ContractError("constant_velocity_baseline: needs >= 2 frames");
  const auto& last = window[window.size() - 1];
  const auto& prev = window[window.size() - 2];
  std::vector<std::vector<float>> out(static_cast<std::size_t>(t_out), last);
  for (int i = 0; i < t_out; ++i) {
    auto& pose = out[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < pose.size(); ++k) {
      pose[k] = last[k] + static_cast<float>(i + 1) * (last[k] - prev[k]);
    }
  }
  return out;
}

}  // namespace sdmtl
