#pragma once

#include <optional>
#include <span>

#include "sdmtl/blocks.hpp"
#include "sdmtl/schedule.hpp"

namespace sdmtl {

struct ModelHyper {
  int t = 10;       // input frames
  int t_out = 10;   // predicted frames
  int n_j = 0;      // joints
  int c = 64;       // channels
  int k = 3;        // kernel size
  int l_en = 1;     // encoder block count
  int l_de = 1;     // decoder block count
  int n = 2;        // motion-block stack length
  bool ted_off = false;  // sum level outputs instead of concat + conv
  bool amg_off = false;  // top-level feature only, no learned weights
  bool rc_off = false;   // drop the shortcut convolutions in motion blocks
  bool ei_off = false;   // feed zeros to the extra interface

  int level_count() const { return t - 1; }
  void validate() const;
  bool operator==(const ModelHyper&) const = default;
};

struct FcParam {
  Tensor w;  // (out, in, 1, 1)
  Tensor b;  // (out, 1, 1, 1)
};

struct DecoderParams {
  std::vector<SeParams> se;
  ConvParam out;  // 1x1, C -> 1
};

/// Every learnable tensor of the network. Pyramid blocks share parameters
/// within a level: exactly one BsmeParams per level.
struct ModelParams {
  ModelHyper hyper;
  ConvParam enc_in;                  // 1x1, 1 -> C
  std::vector<SeParams> enc_se;      // l_en blocks, shared across frames
  std::vector<BsmeParams> pyramid;   // T-1 levels
  std::vector<ConvParam> traj;       // T-1 trajectory convs, (N_l*C -> C, k, k)
  FcParam agg_fc1, agg_fc2, agg_fc3; // C*N_j*3 -> 128 -> 64 -> T-1
  std::vector<DecoderParams> decoders;  // T_out, unshared

  static ModelParams init(const ModelHyper& hyper, std::uint64_t seed);

  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  std::size_t tensor_count() const;
  std::int64_t value_count() const;
};

/// Inputs enter scaled by this factor and predictions leave divided by it,
/// so internal activations stay near unit scale for millimeter data.
inline constexpr float kInputScale = 0.01f;

/// Everything the forward pass produced, for loss composition and tests.
struct ForwardTrace {
  std::vector<Value> encodings;                 // T
  std::vector<std::vector<Value>> pyramid;      // per level, node outputs in order
  std::vector<Value> motion_inputs;             // per block application, in execution order
  std::vector<Value> level_features;            // T-1 (amg_off leaves lower ones invalid)
  Value alpha;                                  // (B, T-1, 1, 1); invalid when amg_off
  Value fused;                                  // (B, C, N_j, 3)
  std::vector<Value> poses;                     // T_out x (B, 1, N_j, 3)
};

Value encode_frame(Tape& tape, Binder& bind, const ModelParams& params, Value frame);

std::vector<std::vector<Value>> run_pyramid(Tape& tape, Binder& bind, const ModelParams& params,
                                            const LevelSchedule& schedule,
                                            std::span<const Value> encodings,
                                            std::vector<Value>* motion_inputs = nullptr);

Value level_feature(Tape& tape, Binder& bind, const ConvParam& traj_conv,
                    std::span<const Value> outputs, bool ted_off, Value* preact = nullptr);

/// Learned weighted summation over level features. The weights come from
/// three sigmoid-activated linear layers on the flattened top feature;
/// forced_alpha bypasses them (test hook).
Value aggregate(Tape& tape, Binder& bind, const ModelParams& params,
                std::span<const Value> level_features, Value top_feature,
                const std::vector<float>* forced_alpha = nullptr, Value* alpha_out = nullptr);

std::vector<Value> decode(Tape& tape, Binder& bind, const ModelParams& params, Value fused);

/// Full forward pass: encode each frame, run the pyramid, form per-level
/// trajectory features, aggregate, decode T_out poses. frames are T values
/// of dims (B, 1, N_j, 3); poses come back as (B, 1, N_j, 3) in millimeters.
ForwardTrace model_forward(Tape& tape, Binder& bind, const ModelParams& params,
                           const LevelSchedule& schedule, std::span<const Value> frames);

// --- template bodies ---

template <typename Self, typename F>
void visit_model_params(Self& p, F&& f) {
  visit_conv(p.enc_in, "enc.in", f);
  for (std::size_t i = 0; i < p.enc_se.size(); ++i) {
    visit_se(p.enc_se[i], "enc.se" + std::to_string(i), f);
  }
  for (std::size_t l = 0; l < p.pyramid.size(); ++l) {
    visit_bsme(p.pyramid[l], "pyr.l" + std::to_string(l + 1), f);
  }
  for (std::size_t l = 0; l < p.traj.size(); ++l) {
    visit_conv(p.traj[l], "traj.l" + std::to_string(l + 1), f);
  }
  visit_conv(p.agg_fc1, "agg.fc1", f);
  visit_conv(p.agg_fc2, "agg.fc2", f);
  visit_conv(p.agg_fc3, "agg.fc3", f);
  for (std::size_t i = 0; i < p.decoders.size(); ++i) {
    const std::string prefix = "dec" + std::to_string(i);
    for (std::size_t j = 0; j < p.decoders[i].se.size(); ++j) {
      visit_se(p.decoders[i].se[j], prefix + ".se" + std::to_string(j), f);
    }
    visit_conv(p.decoders[i].out, prefix + ".out", f);
  }
}

template <typename F>
void ModelParams::visit(F&& f) {
  visit_model_params(*this, std::forward<F>(f));
}

template <typename F>
void ModelParams::visit(F&& f) const {
  visit_model_params(*this, std::forward<F>(f));
}

}  // namespace sdmtl
