#include "sdmtl/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "sdmtl/rng.hpp"

namespace sdmtl {
namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int bit = 0; bit < 8; ++bit) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

struct Crc32 {
  std::uint32_t state = 0xffffffffu;
  void update(const void* data, std::size_t n) {
    static const auto table = make_crc_table();
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) state = table[(state ^ p[i]) & 0xffu] ^ (state >> 8);
  }
  std::uint32_t value() const { return state ^ 0xffffffffu; }
};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  const char* raw(std::size_t n) {
    need(n);
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw ParseError(origin_ + ": truncated checkpoint");
  }
  const std::string& data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[6] = {'S', 'D', 'M', 'T', 'L', '1'};

std::uint32_t pack_flags(const ModelHyper& h) {
  return (h.ted_off ? 1u : 0u) | (h.amg_off ? 2u : 0u) | (h.rc_off ? 4u : 0u) | (h.ei_off ? 8u : 0u);
}

// Frame t of every window in the batch as one (B, 1, N_j, 3) tensor.
Tensor batch_frame(std::span<const SampleWindow> windows, std::span<const int> idx, int frame,
                   bool from_target) {
  const int n_j = static_cast<int>(windows[0].input[0].size() / 3);
  Tensor t({static_cast<int>(idx.size()), 1, n_j, 3});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& w = windows[static_cast<std::size_t>(idx[b])];
    const Pose& pose = from_target ? w.target[static_cast<std::size_t>(frame)]
                                   : w.input[static_cast<std::size_t>(frame)];
    std::copy(pose.begin(), pose.end(), t.data() + t.index(static_cast<int>(b), 0, 0, 0));
  }
  return t;
}

void check_windows(const ModelHyper& hyper, std::span<const SampleWindow> windows) {
  if (windows.empty()) throw ConfigError("training: dataset yields no windows");
  for (const SampleWindow& w : windows) {
    if (static_cast<int>(w.input.size()) != hyper.t ||
        static_cast<int>(w.target.size()) != hyper.t_out ||
        static_cast<int>(w.input[0].size()) != hyper.n_j * 3) {
      throw ConfigError("training: window dims do not match model (t=" + std::to_string(hyper.t) +
                        ", t_out=" + std::to_string(hyper.t_out) + ", n_j=" + std::to_string(hyper.n_j) +
                        ")");
    }
  }
}

// Deterministic endless sample stream: reshuffled pass over all windows.
class BatchStream {
 public:
  BatchStream(std::size_t count, std::uint64_t seed) : count_(count), seed_(seed) { reshuffle(); }

  std::vector<int> next(int batch) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) {
      if (pos_ == order_.size()) {
        ++epoch_;
        reshuffle();
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(count_);
    for (std::size_t i = 0; i < count_; ++i) order_[i] = static_cast<int>(i);
    SeededStream rng(seed_, "shuffle.epoch" + std::to_string(epoch_));
    for (std::size_t i = count_; i > 1; --i) {
      const auto j = rng.next_below(i);
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }

  std::size_t count_;
  std::uint64_t seed_;
  std::vector<int> order_;
  std::size_t pos_ = 0;
  int epoch_ = 0;
};

}  // namespace

std::vector<ParamRef> collect_params(ModelParams& params) {
  std::vector<ParamRef> refs;
  params.visit([&refs](const std::string& name, Tensor& t) { refs.push_back({name, &t}); });
  return refs;
}

void adam_step(std::span<const ParamRef> params, const std::map<std::string, Tensor>& grads,
               AdamState& state) {
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.cfg.beta1), state.step_count);
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.cfg.beta2), state.step_count);
  for (const ParamRef& p : params) {
    auto git = grads.find(p.name);
    if (git == grads.end()) throw ContractError("adam_step: missing gradient for " + p.name);
    const Tensor& g = git->second;
    if (g.shape() != p.tensor->shape()) {
      throw ShapeError("adam_step: gradient dims " + shape_str(g.shape()) + " vs parameter " +
                       shape_str(p.tensor->shape()) + " for " + p.name);
    }
    Tensor& m = state.m.try_emplace(p.name, Tensor::zeros(g.shape())).first->second;
    Tensor& v = state.v.try_emplace(p.name, Tensor::zeros(g.shape())).first->second;
    Tensor& t = *p.tensor;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      m[i] = state.cfg.beta1 * m[i] + (1.0f - state.cfg.beta1) * g[i];
      v[i] = state.cfg.beta2 * v[i] + (1.0f - state.cfg.beta2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      t[i] -= static_cast<float>(state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps));
    }
  }
}

void adam_step(ModelParams& params, const std::map<std::string, Tensor>& grads, AdamState& state) {
  const auto refs = collect_params(params);
  adam_step(refs, grads, state);
}

TrainResult train(const TrainConfig& config, std::span<const SampleWindow> windows,
                  const std::filesystem::path& checkpoint_path,
                  const std::function<void(int, float)>& progress) {
  check_windows(config.hyper, windows);
  if (config.batch < 1) throw ConfigError("training: batch size must be >= 1");
  if (config.steps < 0) throw ConfigError("training: step count must be >= 0");

  TrainResult result{ModelParams::init(config.hyper, config.seed), {}};
  ModelParams& params = result.params;
  const LevelSchedule schedule = build_schedule(config.hyper.t);
  const LossWeights weights = temporal_weights(config.hyper.t_out, config.loss_alpha, config.loss_variant);

  AdamState adam;
  adam.cfg.lr = config.lr;
  BatchStream stream(windows.size(), config.seed);
  const auto refs = collect_params(params);

  for (int step = 0; step < config.steps; ++step) {
    const std::vector<int> idx = stream.next(config.batch);
    Tape tape;
    Binder bind(tape);
    std::vector<Value> frames, targets;
    for (int f = 0; f < config.hyper.t; ++f) {
      frames.push_back(tape.leaf(batch_frame(windows, idx, f, false)));
    }
    for (int f = 0; f < config.hyper.t_out; ++f) {
      targets.push_back(tape.leaf(batch_frame(windows, idx, f, true)));
    }

    ForwardTrace trace = model_forward(tape, bind, params, schedule, frames);
    Value loss = tw_mpjpe_loss(tape, trace.poses, targets, weights);
    const float loss_value = tape.value(loss).scalar_value();
    if (!std::isfinite(loss_value)) {
      throw NumericError("training aborted: loss is non-finite at step " + std::to_string(step + 1));
    }
    tape.backward(loss);

    std::map<std::string, Tensor> grads;
    for (const ParamRef& p : refs) grads.emplace(p.name, bind.grad_of(*p.tensor));
    adam_step(refs, grads, adam);

    result.loss_history.push_back(loss_value);
    if (progress) progress(step + 1, loss_value);
    if (!checkpoint_path.empty() && config.save_interval > 0 && (step + 1) % config.save_interval == 0) {
      save_checkpoint(params, checkpoint_path);
    }
  }

  if (!checkpoint_path.empty()) save_checkpoint(params, checkpoint_path);
  return result;
}

double eval_tw_loss(const ModelParams& params, std::span<const SampleWindow> windows,
                    const LossWeights& weights, int batch) {
  check_windows(params.hyper, windows);
  const LevelSchedule schedule = build_schedule(params.hyper.t);
  double total = 0.0;
  std::size_t done = 0;
  while (done < windows.size()) {
    const int b = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch), windows.size() - done));
    std::vector<int> idx(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(done) + i;
    Tape tape;
    Binder bind(tape);
    std::vector<Value> frames, targets;
    for (int f = 0; f < params.hyper.t; ++f) frames.push_back(tape.leaf(batch_frame(windows, idx, f, false)));
    for (int f = 0; f < params.hyper.t_out; ++f) targets.push_back(tape.leaf(batch_frame(windows, idx, f, true)));
    ForwardTrace trace = model_forward(tape, bind, params, schedule, frames);
    Value loss = tw_mpjpe_loss(tape, trace.poses, targets, weights);
    total += static_cast<double>(tape.value(loss).scalar_value()) * b;
    done += static_cast<std::size_t>(b);
  }
  return total / static_cast<double>(windows.size());
}

std::vector<std::vector<Pose>> predict_batch(const ModelParams& params,
                                             std::span<const SampleWindow> windows, int batch) {
  const LevelSchedule schedule = build_schedule(params.hyper.t);
  std::vector<std::vector<Pose>> out(windows.size());
  std::size_t done = 0;
  while (done < windows.size()) {
    const int b = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch), windows.size() - done));
    std::vector<int> idx(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(done) + i;
    Tape tape;
    Binder bind(tape);
    std::vector<Value> frames;
    for (int f = 0; f < params.hyper.t; ++f) frames.push_back(tape.leaf(batch_frame(windows, idx, f, false)));
    ForwardTrace trace = model_forward(tape, bind, params, schedule, frames);
    for (int i = 0; i < b; ++i) {
      auto& poses = out[done + static_cast<std::size_t>(i)];
      poses.reserve(trace.poses.size());
      for (Value pv : trace.poses) {
        const Tensor& pt = tape.value(pv);
        const float* row = pt.data() + pt.index(i, 0, 0, 0);
        poses.emplace_back(row, row + static_cast<std::size_t>(params.hyper.n_j) * 3);
      }
    }
    done += static_cast<std::size_t>(b);
  }
  return out;
}

std::vector<Pose> predict_window(const ModelParams& params, std::span<const Pose> input) {
  if (static_cast<int>(input.size()) != params.hyper.t) {
    throw ContractError("predict_window: got " + std::to_string(input.size()) + " frames, expected " +
                        std::to_string(params.hyper.t));
  }
  SampleWindow w;
  w.input.assign(input.begin(), input.end());
  w.target.assign(static_cast<std::size_t>(params.hyper.t_out),
                  Pose(static_cast<std::size_t>(params.hyper.n_j) * 3, 0.0f));
  return predict_batch(params, std::span<const SampleWindow>(&w, 1), 1)[0];
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::string blob(kMagic, sizeof kMagic);
  const ModelHyper& h = params.hyper;
  for (int v : {h.t, h.t_out, h.n_j, h.c, h.k, h.l_en, h.l_de, h.n}) {
    put_u32(blob, static_cast<std::uint32_t>(v));
  }
  put_u32(blob, pack_flags(h));
  put_u32(blob, static_cast<std::uint32_t>(params.tensor_count()));

  Crc32 crc;
  params.visit([&blob, &crc](const std::string& name, const Tensor& t) {
    put_u32(blob, static_cast<std::uint32_t>(name.size()));
    blob += name;
    put_u32(blob, 4u);
    const Shape4 s = t.shape();
    for (int dim : {s.b, s.c, s.j, s.d}) put_u32(blob, static_cast<std::uint32_t>(dim));
    for (std::int64_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits;
      const float f = t[i];
      std::memcpy(&bits, &f, 4);
      const std::size_t at = blob.size();
      put_u32(blob, bits);
      crc.update(blob.data() + at, 4);
    }
  });
  put_u32(blob, crc.value());

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelHyper* expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ByteReader r(blob, path.string());
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ParseError(path.string() + ": bad checkpoint magic");
  }
  ModelHyper h;
  h.t = static_cast<int>(r.u32());
  h.t_out = static_cast<int>(r.u32());
  h.n_j = static_cast<int>(r.u32());
  h.c = static_cast<int>(r.u32());
  h.k = static_cast<int>(r.u32());
  h.l_en = static_cast<int>(r.u32());
  h.l_de = static_cast<int>(r.u32());
  h.n = static_cast<int>(r.u32());
  const std::uint32_t flags = r.u32();
  h.ted_off = flags & 1u;
  h.amg_off = flags & 2u;
  h.rc_off = flags & 4u;
  h.ei_off = flags & 8u;
  h.validate();
  if (expect && !(h == *expect)) {
    throw ConfigError(path.string() + ": checkpoint hyperparameters do not match the requested model");
  }

  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor> loaded;
  Crc32 crc;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw ParseError(path.string() + ": implausible parameter name length");
    const std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank != 4) throw ParseError(path.string() + ": parameter " + name + " has rank " + std::to_string(rank));
    Shape4 s;
    s.b = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.j = static_cast<int>(r.u32());
    s.d = static_cast<int>(r.u32());
    if (s.count() < 0 || s.count() > (1ll << 30)) {
      throw ParseError(path.string() + ": implausible dims for parameter " + name);
    }
    Tensor t(s);
    const char* raw = r.raw(static_cast<std::size_t>(t.size()) * 4);
    crc.update(raw, static_cast<std::size_t>(t.size()) * 4);
    for (std::int64_t k = 0; k < t.size(); ++k) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) {
        bits = (bits << 8) | static_cast<unsigned char>(raw[k * 4 + b]);
      }
      float f;
      std::memcpy(&f, &bits, 4);
      t[k] = f;
    }
    if (!loaded.emplace(name, std::move(t)).second) {
      throw ParseError(path.string() + ": duplicate parameter name " + name);
    }
  }
  const std::uint32_t stored_crc = r.u32();
  if (!r.at_end()) throw ParseError(path.string() + ": trailing bytes after checksum");
  if (stored_crc != crc.value()) {
    throw ParseError(path.string() + ": payload checksum mismatch (corrupted checkpoint)");
  }

  ModelParams params = ModelParams::init(h, 0);
  std::size_t filled = 0;
  params.visit([&](const std::string& name, Tensor& t) {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw ParseError(path.string() + ": missing parameter " + name);
    if (it->second.shape() != t.shape()) {
      throw ParseError(path.string() + ": parameter " + name + " dims " + shape_str(it->second.shape()) +
                       " do not match model " + shape_str(t.shape()));
    }
    t = it->second;
    ++filled;
  });
  if (filled != loaded.size()) {
    for (const auto& [name, tensor] : loaded) {
      (void)tensor;
      bool known = false;
      params.visit([&](const std::string& n, Tensor&) { known |= (n == name); });
      if (!known) throw ParseError(path.string() + ": unknown parameter name " + name);
    }
  }
  return params;
}

void save_loss_history(const std::vector<float>& history, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < history.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, static_cast<double>(history[i]));
      out << buf;
    }
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sdmtl
