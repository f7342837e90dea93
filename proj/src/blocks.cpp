#include "sdmtl/blocks.hpp"

namespace sdmtl {

ConvParam make_conv_param(int in_c, int out_c, int k, std::uint64_t seed, const std::string& name) {
  if (in_c < 1 || out_c < 1) throw ConfigError("conv channels must be positive: " + name);
  if (k < 1 || k % 2 == 0) throw ConfigError("conv kernel size must be odd: " + name);
  ConvParam p;
  p.w = seeded_init({out_c, in_c, k, k}, in_c * k * k, seed, name + ".w");
  p.b = Tensor::zeros({out_c, 1, 1, 1});
  return p;
}

namespace {

void scale_weights(Tensor& w, float gain) {
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] *= gain;
}

}  // namespace

SeParams make_se_params(int in_c, int out_c, int k, std::uint64_t seed, const std::string& name) {
  SeParams p;
  p.conv_a = make_conv_param(in_c, out_c, k, seed, name + ".a");
  p.conv_b = make_conv_param(out_c, out_c, k, seed, name + ".b");
  p.skip = make_conv_param(in_c, out_c, 1, seed, name + ".skip");
  // The branch and the skip add; damp both so the block preserves activation
  // variance at init instead of doubling it per block.
  scale_weights(p.conv_b.w, 0.7f);
  scale_weights(p.skip.w, 0.5f);
  return p;
}

Value se_forward(Tape& tape, Binder& bind, const SeParams& p, Value x) {
  const int xc = tape.value(x).shape().c;
  if (xc != p.in_channels()) {
    throw ShapeError("se_forward: input channels " + shape_str(tape.value(x).shape()) +
                     " do not match block weight " + shape_str(p.conv_a.w.shape()));
  }
  Value h = leaky_relu(tape, conv2d(tape, x, bind(p.conv_a.w), bind(p.conv_a.b)), kLeakySlope);
  h = leaky_relu(tape, conv2d(tape, h, bind(p.conv_b.w), bind(p.conv_b.b)), kLeakySlope);
  Value s = conv2d(tape, x, bind(p.skip.w), bind(p.skip.b));
  return add(tape, h, s);
}

RseParams make_rse_params(int c, int k, std::uint64_t seed, const std::string& name) {
  if (c < 2 || c % 2 != 0) {
    throw ConfigError("rse requires an even channel count, got " + std::to_string(c));
  }
  const int half = c / 2;
  RseParams p;
  p.reduce = make_se_params(c, half, k, seed, name + ".reduce");
  p.inner1 = make_se_params(half, half, k, seed, name + ".inner1");
  p.inner2 = make_se_params(half, half, k, seed, name + ".inner2");
  p.restore = make_se_params(half, c, k, seed, name + ".restore");
  return p;
}

Value rse_forward(Tape& tape, Binder& bind, const RseParams& p, Value x) {
  Value h = se_forward(tape, bind, p.reduce, x);
  h = se_forward(tape, bind, p.inner1, h);
  h = se_forward(tape, bind, p.inner2, h);
  return se_forward(tape, bind, p.restore, h);
}

BsmeParams make_bsme_params(int c, int k, int n, std::uint64_t seed, const std::string& name) {
  if (n < 1) throw ConfigError("bsme stack length n must be >= 1, got " + std::to_string(n));
  BsmeParams p;
  for (int i = 0; i <= n; ++i) {
    p.prev_stack.push_back(make_se_params(c, c, k, seed, name + ".prev" + std::to_string(i)));
  }
  for (int i = 0; i < n; ++i) {
    p.cur_stack.push_back(make_se_params(c, c, k, seed, name + ".cur" + std::to_string(i)));
    p.motion_stack.push_back(make_se_params(c, c, k, seed, name + ".motion" + std::to_string(i)));
  }
  // The motion stack sees a difference of two pathways (twice the variance)
  // and the output sums four branches; damp accordingly.
  scale_weights(p.motion_stack[0].conv_a.w, 0.7f);
  scale_weights(p.motion_stack[0].skip.w, 0.7f);
  p.sc_prev = make_conv_param(c, c, 1, seed, name + ".sc_prev");
  p.sc_cur = make_conv_param(c, c, 1, seed, name + ".sc_cur");
  p.sc_extra = make_conv_param(c, c, 1, seed, name + ".sc_extra");
  scale_weights(p.sc_prev.w, 0.25f);
  scale_weights(p.sc_cur.w, 0.25f);
  scale_weights(p.sc_extra.w, 0.25f);
  return p;
}

BsmeResult bsme_forward(Tape& tape, Binder& bind, const BsmeParams& p, Value f_prev, Value f_cur,
                        Value x_extra, bool rc_off) {
  const Shape4 sp = tape.value(f_prev).shape();
  if (tape.value(f_cur).shape() != sp || tape.value(x_extra).shape() != sp) {
    throw ShapeError("bsme_forward: inputs disagree, prev " + shape_str(sp) + " cur " +
                     shape_str(tape.value(f_cur).shape()) + " extra " +
                     shape_str(tape.value(x_extra).shape()));
  }

  Value s_prev = f_prev;
  for (const SeParams& se : p.prev_stack) s_prev = se_forward(tape, bind, se, s_prev);
  Value s_cur = f_cur;
  for (const SeParams& se : p.cur_stack) s_cur = se_forward(tape, bind, se, s_cur);

  Value motion_in = sub(tape, s_prev, s_cur);
  Value m = motion_in;
  for (const SeParams& se : p.motion_stack) m = se_forward(tape, bind, se, m);

  if (rc_off) return {m, motion_in};

  Value y = add(tape, m, conv2d(tape, s_prev, bind(p.sc_prev.w), bind(p.sc_prev.b)));
  y = add(tape, y, conv2d(tape, s_cur, bind(p.sc_cur.w), bind(p.sc_cur.b)));
  y = add(tape, y, conv2d(tape, x_extra, bind(p.sc_extra.w), bind(p.sc_extra.b)));
  return {y, motion_in};
}

}  // namespace sdmtl
