#pragma once

#include <filesystem>
#include <functional>
#include <map>

#include "sdmtl/data.hpp"
#include "sdmtl/gradcheck.hpp"
#include "sdmtl/loss.hpp"
#include "sdmtl/model.hpp"

namespace sdmtl {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t step_count = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// Standard Adam with bias correction, applied in the given (fixed) parameter
/// order. Every parameter must have a gradient entry of matching dims.
void adam_step(std::span<const ParamRef> params, const std::map<std::string, Tensor>& grads,
               AdamState& state);
void adam_step(ModelParams& params, const std::map<std::string, Tensor>& grads, AdamState& state);

std::vector<ParamRef> collect_params(ModelParams& params);

struct TrainConfig {
  ModelHyper hyper;
  WeightVariant loss_variant = WeightVariant::exp;
  float loss_alpha = 0.3f;
  float lr = 1e-4f;
  int steps = 1000;
  int batch = 16;
  std::uint64_t seed = 1;
  int save_interval = 0;  // checkpoint every N steps; 0 = final only
};

struct TrainResult {
  ModelParams params;
  std::vector<float> loss_history;  // one entry per step
};

/// Minibatch training with a seeded shuffle per pass over the windows.
/// Aborts with NumericError when the loss turns non-finite, naming the step.
/// When checkpoint_path is non-empty the final parameters (and periodic
/// snapshots, per save_interval) are written there.
TrainResult train(const TrainConfig& config, std::span<const SampleWindow> windows,
                  const std::filesystem::path& checkpoint_path = {},
                  const std::function<void(int step, float loss)>& progress = {});

/// TW-MPJPE of the model over the given windows (no parameter updates).
double eval_tw_loss(const ModelParams& params, std::span<const SampleWindow> windows,
                    const LossWeights& weights, int batch = 16);

/// Model predictions per window, each T_out poses of N_j*3 floats.
std::vector<std::vector<Pose>> predict_batch(const ModelParams& params,
                                             std::span<const SampleWindow> windows, int batch = 16);
std::vector<Pose> predict_window(const ModelParams& params, std::span<const Pose> input);

/// Binary checkpoint: magic "SDMTL1", hyperparameter block, named parameter
/// records, trailing CRC-32 of the parameter payload bytes. Writes are
/// atomic; roundtrips are byte-identical.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelHyper* expect = nullptr);

void save_loss_history(const std::vector<float>& history, const std::filesystem::path& path);

}  // namespace sdmtl
