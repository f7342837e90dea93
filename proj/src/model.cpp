#include "sdmtl/model.hpp"

#include <algorithm>

namespace sdmtl {

void ModelHyper::validate() const {
  if (t < 2) throw ConfigError("model: input length t must be >= 2, got " + std::to_string(t));
  if (t_out < 1) throw ConfigError("model: t_out must be >= 1, got " + std::to_string(t_out));
  if (n_j < 1) throw ConfigError("model: joint count must be >= 1, got " + std::to_string(n_j));
  if (c < 1) throw ConfigError("model: channel count must be >= 1, got " + std::to_string(c));
  if (k < 1 || k % 2 == 0) throw ConfigError("model: kernel size must be odd, got " + std::to_string(k));
  if (l_en < 1 || l_de < 1) throw ConfigError("model: l_en and l_de must be >= 1");
  if (n < 1) throw ConfigError("model: stack length n must be >= 1, got " + std::to_string(n));
}

ModelParams ModelParams::init(const ModelHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  const LevelSchedule schedule = build_schedule(hyper.t);

  ModelParams p;
  p.hyper = hyper;
  p.enc_in = make_conv_param(1, hyper.c, 1, seed, "enc.in");
  for (int i = 0; i < hyper.l_en; ++i) {
    p.enc_se.push_back(make_se_params(hyper.c, hyper.c, hyper.k, seed, "enc.se" + std::to_string(i)));
  }
  for (int l = 1; l <= hyper.level_count(); ++l) {
    p.pyramid.push_back(make_bsme_params(hyper.c, hyper.k, hyper.n, seed, "pyr.l" + std::to_string(l)));
    const int n_l = static_cast<int>(schedule.levels[static_cast<std::size_t>(l - 1)].size());
    p.traj.push_back(
        make_conv_param(n_l * hyper.c, hyper.c, hyper.k, seed, "traj.l" + std::to_string(l)));
  }

  const int flat = hyper.c * hyper.n_j * 3;
  p.agg_fc1.w = seeded_init({128, flat, 1, 1}, flat, seed, "agg.fc1.w");
  p.agg_fc1.b = Tensor::zeros({128, 1, 1, 1});
  p.agg_fc2.w = seeded_init({64, 128, 1, 1}, 128, seed, "agg.fc2.w");
  p.agg_fc2.b = Tensor::zeros({64, 1, 1, 1});
  p.agg_fc3.w = seeded_init({hyper.level_count(), 64, 1, 1}, 64, seed, "agg.fc3.w");
  p.agg_fc3.b = Tensor::zeros({hyper.level_count(), 1, 1, 1});

  for (int i = 0; i < hyper.t_out; ++i) {
    DecoderParams dec;
    const std::string prefix = "dec" + std::to_string(i);
    for (int j = 0; j < hyper.l_de; ++j) {
      dec.se.push_back(make_se_params(hyper.c, hyper.c, hyper.k, seed, prefix + ".se" + std::to_string(j)));
    }
    dec.out = make_conv_param(hyper.c, 1, 1, seed, prefix + ".out");
    p.decoders.push_back(std::move(dec));
  }
  return p;
}

std::size_t ModelParams::tensor_count() const {
  std::size_t n = 0;
  visit([&n](const std::string&, const Tensor&) { ++n; });
  return n;
}

std::int64_t ModelParams::value_count() const {
  std::int64_t n = 0;
  visit([&n](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

Value encode_frame(Tape& tape, Binder& bind, const ModelParams& params, Value frame) {
  const Shape4 fs = tape.value(frame).shape();
  if (fs.c != 1 || fs.j != params.hyper.n_j || fs.d != 3) {
    throw ShapeError("encode_frame: frame dims " + shape_str(fs) + " do not match (B,1," +
                     std::to_string(params.hyper.n_j) + ",3)");
  }
  Value h = scale(tape, frame, kInputScale);
  h = conv2d(tape, h, bind(params.enc_in.w), bind(params.enc_in.b));
  for (const SeParams& se : params.enc_se) h = se_forward(tape, bind, se, h);
  return h;
}

std::vector<std::vector<Value>> run_pyramid(Tape& tape, Binder& bind, const ModelParams& params,
                                            const LevelSchedule& schedule,
                                            std::span<const Value> encodings,
                                            std::vector<Value>* motion_inputs) {
  if (static_cast<int>(encodings.size()) != schedule.t) {
    throw ConfigError("run_pyramid: " + std::to_string(encodings.size()) + " encodings for schedule of t=" +
                      std::to_string(schedule.t));
  }
  if (static_cast<int>(params.pyramid.size()) != schedule.level_count()) {
    throw ConfigError("run_pyramid: schedule has " + std::to_string(schedule.level_count()) +
                      " levels but params carry " + std::to_string(params.pyramid.size()));
  }

  // outputs[0] aliases the encoder outputs; outputs[l] is level l.
  std::vector<std::vector<Value>> outputs;
  outputs.emplace_back(encodings.begin(), encodings.end());

  Value zero_extra;
  if (params.hyper.ei_off) {
    zero_extra = tape.leaf(Tensor::zeros(tape.value(encodings[0]).shape()));
  }

  for (int l = 1; l <= schedule.level_count(); ++l) {
    const auto& nodes = schedule.levels[static_cast<std::size_t>(l - 1)];
    const BsmeParams& block = params.pyramid[static_cast<std::size_t>(l - 1)];
    std::vector<Value> level_out;
    level_out.reserve(nodes.size());
    for (const ScheduleNode& node : nodes) {
      const auto& ins = outputs[static_cast<std::size_t>(node.input_level)];
      if (node.is_carry()) {
        level_out.push_back(ins[static_cast<std::size_t>(node.carry_index)]);
        continue;
      }
      Value extra = params.hyper.ei_off
                        ? zero_extra
                        : encodings[static_cast<std::size_t>(node.extra_frame - 1)];
      BsmeResult r = bsme_forward(tape, bind, block, ins[static_cast<std::size_t>(node.prev_index)],
                                  ins[static_cast<std::size_t>(node.cur_index)], extra,
                                  params.hyper.rc_off);
      if (motion_inputs) motion_inputs->push_back(r.motion_input);
      level_out.push_back(r.out);
    }
    outputs.push_back(std::move(level_out));
  }

  outputs.erase(outputs.begin());
  return outputs;
}

Value level_feature(Tape& tape, Binder& bind, const ConvParam& traj_conv,
                    std::span<const Value> outputs, bool ted_off, Value* preact) {
  if (outputs.empty()) throw ShapeError("level_feature: no level outputs");
  Value pre;
  if (ted_off) {
    pre = outputs[0];
    for (std::size_t i = 1; i < outputs.size(); ++i) pre = add(tape, pre, outputs[i]);
  } else {
    Value cat = outputs.size() == 1 ? outputs[0] : concat_channels(tape, outputs);
    pre = conv2d(tape, cat, bind(traj_conv.w), bind(traj_conv.b));
  }
  if (preact) *preact = pre;
  return leaky_relu(tape, pre, kLeakySlope);
}

Value aggregate(Tape& tape, Binder& bind, const ModelParams& params,
                std::span<const Value> level_features, Value top_feature,
                const std::vector<float>* forced_alpha, Value* alpha_out) {
  const int levels = params.hyper.level_count();
  if (static_cast<int>(level_features.size()) != levels) {
    throw ConfigError("aggregate: got " + std::to_string(level_features.size()) +
                      " level features, expected " + std::to_string(levels));
  }
  if (params.hyper.amg_off) {
    if (alpha_out) *alpha_out = Value{};
    return top_feature;
  }

  const int batch = tape.value(top_feature).shape().b;
  Value alpha;
  if (forced_alpha) {
    if (static_cast<int>(forced_alpha->size()) != levels) {
      throw ConfigError("aggregate: forced alpha has " + std::to_string(forced_alpha->size()) +
                        " entries, expected " + std::to_string(levels));
    }
    Tensor a({batch, levels, 1, 1});
    for (int b = 0; b < batch; ++b)
      for (int l = 0; l < levels; ++l) a.at(b, l, 0, 0) = (*forced_alpha)[static_cast<std::size_t>(l)];
    alpha = tape.leaf(std::move(a));
  } else {
    Value h = flatten_features(tape, top_feature);
    h = sigmoid(tape, fully_connected(tape, h, bind(params.agg_fc1.w), bind(params.agg_fc1.b)));
    h = sigmoid(tape, fully_connected(tape, h, bind(params.agg_fc2.w), bind(params.agg_fc2.b)));
    alpha = sigmoid(tape, fully_connected(tape, h, bind(params.agg_fc3.w), bind(params.agg_fc3.b)));
  }
  if (alpha_out) *alpha_out = alpha;
  return weighted_sum(tape, level_features, alpha);
}

std::vector<Value> decode(Tape& tape, Binder& bind, const ModelParams& params, Value fused) {
  const Shape4 fs = tape.value(fused).shape();
  if (fs.c != params.hyper.c || fs.j != params.hyper.n_j || fs.d != 3) {
    throw ShapeError("decode: fused dims " + shape_str(fs) + " do not match (B," +
                     std::to_string(params.hyper.c) + "," + std::to_string(params.hyper.n_j) + ",3)");
  }
  std::vector<Value> poses;
  poses.reserve(params.decoders.size());
  for (const DecoderParams& dec : params.decoders) {
    Value h = fused;
    for (const SeParams& se : dec.se) h = se_forward(tape, bind, se, h);
    h = conv2d(tape, h, bind(dec.out.w), bind(dec.out.b));
    poses.push_back(scale(tape, h, 1.0f / kInputScale));
  }
  return poses;
}

ForwardTrace model_forward(Tape& tape, Binder& bind, const ModelParams& params,
                           const LevelSchedule& schedule, std::span<const Value> frames) {
  if (static_cast<int>(frames.size()) != params.hyper.t) {
    throw ShapeError("model_forward: got " + std::to_string(frames.size()) + " frames, expected t=" +
                     std::to_string(params.hyper.t));
  }

  ForwardTrace trace;
  trace.encodings.reserve(frames.size());
  for (Value f : frames) trace.encodings.push_back(encode_frame(tape, bind, params, f));

  trace.pyramid = run_pyramid(tape, bind, params, schedule, trace.encodings, &trace.motion_inputs);

  const int levels = params.hyper.level_count();
  trace.level_features.assign(static_cast<std::size_t>(levels), Value{});
  for (int l = levels; l >= 1; --l) {
    // amg_off uses only the top feature; skip the rest.
    if (params.hyper.amg_off && l != levels) break;
    trace.level_features[static_cast<std::size_t>(l - 1)] =
        level_feature(tape, bind, params.traj[static_cast<std::size_t>(l - 1)],
                      trace.pyramid[static_cast<std::size_t>(l - 1)], params.hyper.ted_off);
  }

  trace.fused = aggregate(tape, bind, params, trace.level_features,
                          trace.level_features[static_cast<std::size_t>(levels - 1)], nullptr,
                          &trace.alpha);
  trace.poses = decode(tape, bind, params, trace.fused);
  return trace;
}

}  // namespace sdmtl
