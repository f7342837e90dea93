#pragma once

#include <string>
#include <vector>

#include "sdmtl/ops.hpp"
#include "sdmtl/rng.hpp"

namespace sdmtl {

inline constexpr float kLeakySlope = 0.2f;

struct ConvParam {
  Tensor w;  // (outC, inC, k, k)
  Tensor b;  // (outC, 1, 1, 1)
};

ConvParam make_conv_param(int in_c, int out_c, int k, std::uint64_t seed, const std::string& name);

/// Spatial encoding block: two activated convolutions plus an unactivated
/// 1x1 convolution on the skip path. No batch normalization. in/out channel
/// counts may differ; conv_a and skip carry the boundary.
struct SeParams {
  ConvParam conv_a;  // (outC, inC, k, k)
  ConvParam conv_b;  // (outC, outC, k, k)
  ConvParam skip;    // (outC, inC, 1, 1)

  int in_channels() const { return conv_a.w.shape().c; }
  int out_channels() const { return conv_a.w.shape().b; }
};

SeParams make_se_params(int in_c, int out_c, int k, std::uint64_t seed, const std::string& name);

/// y = act(conv_b(act(conv_a(x)))) + skip(x), act = Leaky ReLU(0.2).
Value se_forward(Tape& tape, Binder& bind, const SeParams& p, Value x);

/// Squeeze-and-restore stack: channel count halves through two inner blocks
/// and is restored on the way out.
struct RseParams {
  SeParams reduce;   // C -> C/2
  SeParams inner1;   // C/2 -> C/2
  SeParams inner2;   // C/2 -> C/2
  SeParams restore;  // C/2 -> C
};

RseParams make_rse_params(int c, int k, std::uint64_t seed, const std::string& name);

Value rse_forward(Tape& tape, Binder& bind, const RseParams& p, Value x);

/// Motion-sensitive block. Two spatial pathways (the earlier input gets one
/// extra block), element-wise subtraction into a motion stack, and three
/// unactivated 1x1 shortcut convolutions fused by summation, one of them an
/// extra interface for outside features.
struct BsmeParams {
  std::vector<SeParams> prev_stack;    // n+1 blocks
  std::vector<SeParams> cur_stack;     // n blocks
  std::vector<SeParams> motion_stack;  // n blocks
  ConvParam sc_prev;
  ConvParam sc_cur;
  ConvParam sc_extra;
};

BsmeParams make_bsme_params(int c, int k, int n, std::uint64_t seed, const std::string& name);

struct BsmeResult {
  Value out;
  Value motion_input;  // s_prev - s_cur, before the motion stack
};

/// With rc_off the three shortcut convolutions are dropped and the output is
/// the motion-stack result alone.
BsmeResult bsme_forward(Tape& tape, Binder& bind, const BsmeParams& p, Value f_prev, Value f_cur,
                        Value x_extra, bool rc_off = false);

// Parameter enumeration in canonical order; f(name, Tensor&).
template <typename P, typename F>
void visit_conv(P& p, const std::string& prefix, F&& f) {
  f(prefix + ".w", p.w);
  f(prefix + ".b", p.b);
}

template <typename P, typename F>
void visit_se(P& p, const std::string& prefix, F&& f) {
  visit_conv(p.conv_a, prefix + ".a", f);
  visit_conv(p.conv_b, prefix + ".b", f);
  visit_conv(p.skip, prefix + ".skip", f);
}

template <typename P, typename F>
void visit_rse(P& p, const std::string& prefix, F&& f) {
  visit_se(p.reduce, prefix + ".reduce", f);
  visit_se(p.inner1, prefix + ".inner1", f);
  visit_se(p.inner2, prefix + ".inner2", f);
  visit_se(p.restore, prefix + ".restore", f);
}

template <typename P, typename F>
void visit_bsme(P& p, const std::string& prefix, F&& f) {
  for (std::size_t i = 0; i < p.prev_stack.size(); ++i) {
    visit_se(p.prev_stack[i], prefix + ".prev" + std::to_string(i), f);
  }
  for (std::size_t i = 0; i < p.cur_stack.size(); ++i) {
    visit_se(p.cur_stack[i], prefix + ".cur" + std::to_string(i), f);
  }
  for (std::size_t i = 0; i < p.motion_stack.size(); ++i) {
    visit_se(p.motion_stack[i], prefix + ".motion" + std::to_string(i), f);
  }
  visit_conv(p.sc_prev, prefix + ".sc_prev", f);
  visit_conv(p.sc_cur, prefix + ".sc_cur", f);
  visit_conv(p.sc_extra, prefix + ".sc_extra", f);
}

}  // namespace sdmtl
