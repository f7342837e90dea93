#include "sdmtl/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdmtl/gradsuite.hpp"

namespace sdmtl {
namespace {

int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
  }
  return v;
}

float parse_float(const std::string& key, const std::string& value) {
  float v = 0.0f;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void apply_ablation(ModelHyper& hyper, const std::string& which) {
  if (which == "ted") {
    hyper.ted_off = true;
  } else if (which == "amg") {
    hyper.amg_off = true;
  } else if (which == "rc") {
    hyper.rc_off = true;
  } else if (which == "ei") {
    hyper.ei_off = true;
  } else {
    throw ConfigError("unknown ablation '" + which + "' (expected ted, amg, rc or ei)");
  }
}

struct Dataset {
  std::vector<SkeletonSequence> sequences;  // preprocessed, lexicographic file order
  int n_j = 0;
};

Dataset load_dataset(const std::filesystem::path& dir, int root_joint) {
  if (!std::filesystem::is_directory(dir)) throw IoError("data directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .csv sequences in " + dir.string());

  Dataset ds;
  for (const auto& f : files) {
    SkeletonSequence seq = preprocess(load_csv(f), root_joint);
    if (ds.n_j == 0) {
      ds.n_j = seq.n_j;
    } else if (seq.n_j != ds.n_j) {
      throw ShapeError("sequence " + f.string() + " has " + std::to_string(seq.n_j) +
                       " joints after preprocessing, others have " + std::to_string(ds.n_j));
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

// 80/10/10 by sequence index: val and test each take floor(N/10).
std::span<const SkeletonSequence> split_view(const Dataset& ds, const std::string& split) {
  const std::size_t n = ds.sequences.size();
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;
  std::span<const SkeletonSequence> all(ds.sequences);
  if (split == "all") return all;
  if (split == "train") return all.subspan(0, n_train);
  if (split == "val") return all.subspan(n_train, n_val);
  if (split == "test") return all.subspan(n_train + n_val, n_test);
  throw ConfigError("unknown split '" + split + "' (expected train, val, test or all)");
}

std::vector<SampleWindow> windows_of(std::span<const SkeletonSequence> seqs, int t, int t_out,
                                     int stride) {
  std::vector<SampleWindow> out;
  for (const SkeletonSequence& s : seqs) {
    auto w = make_windows(s, t, t_out, stride);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

// --- synth ---

struct SynthArgs {
  std::string out_dir;
  int sequences = 16;
  int frames = 60;
  int joints = 8;
  std::uint64_t seed = 1;
};

int do_synth(const SynthArgs& a) {
  std::filesystem::create_directories(a.out_dir);
  const auto seqs = synth_generate(a.sequences, a.frames, a.joints, a.seed);
  nlohmann::json manifest;
  manifest["seed"] = a.seed;
  manifest["sequences"] = a.sequences;
  manifest["frames"] = a.frames;
  manifest["joints"] = a.joints;
  manifest["frame_interval_ms"] = SkeletonSequence::kFrameIntervalMs;
  manifest["files"] = nlohmann::json::array();
  for (const SkeletonSequence& s : seqs) {
    const std::filesystem::path path = std::filesystem::path(a.out_dir) / (s.name + ".csv");
    save_csv(s, path);
    manifest["files"].push_back(s.name + ".csv");
  }
  const std::filesystem::path mpath = std::filesystem::path(a.out_dir) / "manifest.json";
  const std::filesystem::path tmp = mpath.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << manifest.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, mpath);
  std::cout << "wrote " << seqs.size() << " sequences to " << a.out_dir << "\n";
  return 0;
}

// --- train ---

struct TrainArgs {
  std::string config_file;
  std::string data_dir;
  std::string out_ckpt;
  std::string loss;
  std::vector<std::string> ablate;
  std::int64_t seed = -1;
  int steps = -1;
  int batch = -1;
  double lr = -1.0;
  int root_joint = 0;
  int stride = 1;
  bool quiet = false;
};

int do_train(const TrainArgs& a) {
  TrainConfig config;
  if (!a.config_file.empty()) apply_config_file(config, parse_key_value_file(a.config_file));
  if (a.seed >= 0) config.seed = static_cast<std::uint64_t>(a.seed);
  if (!a.loss.empty()) config.loss_variant = weight_variant_from_name(a.loss);
  if (a.steps >= 0) config.steps = a.steps;
  if (a.batch > 0) config.batch = a.batch;
  if (a.lr > 0) config.lr = static_cast<float>(a.lr);
  for (const std::string& which : a.ablate) apply_ablation(config.hyper, which);

  Dataset ds = load_dataset(a.data_dir, a.root_joint);
  if (config.hyper.n_j != 0 && config.hyper.n_j != ds.n_j) {
    throw ConfigError("config n_j=" + std::to_string(config.hyper.n_j) + " but data has " +
                      std::to_string(ds.n_j) + " joints after preprocessing");
  }
  config.hyper.n_j = ds.n_j;

  const auto train_windows = windows_of(split_view(ds, "train"), config.hyper.t, config.hyper.t_out, a.stride);
  const auto val_windows = windows_of(split_view(ds, "val"), config.hyper.t, config.hyper.t_out, a.stride);
  if (train_windows.empty()) {
    throw ConfigError("training split yields no windows (need sequences of >= " +
                      std::to_string(config.hyper.t + config.hyper.t_out) + " frames)");
  }
  std::cout << "training on " << train_windows.size() << " windows (" << ds.sequences.size()
            << " sequences, n_j=" << ds.n_j << "), " << config.steps << " steps\n";

  const int report_every = std::max(1, config.steps / 10);
  auto progress = [&](int step, float loss) {
    if (!a.quiet && (step % report_every == 0 || step == config.steps)) {
      std::printf("step %6d  loss %.6g\n", step, static_cast<double>(loss));
    }
  };
  TrainResult result = train(config, train_windows, a.out_ckpt, progress);
  save_loss_history(result.loss_history, a.out_ckpt + ".loss.csv");

  const LossWeights weights = temporal_weights(config.hyper.t_out, config.loss_alpha, config.loss_variant);
  const double train_loss = eval_tw_loss(result.params, train_windows, weights, config.batch);
  std::printf("final train TW-MPJPE: %.6g\n", train_loss);
  if (!val_windows.empty()) {
    std::printf("final val   TW-MPJPE: %.6g\n", eval_tw_loss(result.params, val_windows, weights, config.batch));
  } else {
    std::printf("final val   TW-MPJPE: n/a (no validation sequences)\n");
  }
  std::cout << "checkpoint: " << a.out_ckpt << "\nloss history: " << a.out_ckpt << ".loss.csv\n";
  return 0;
}

// --- eval ---

struct EvalArgs {
  std::string ckpt;
  std::string data_dir;
  std::string horizons;
  std::string out_csv;
  std::string split = "all";
  int root_joint = 0;
  int stride = 1;
};

std::vector<int> parse_horizons(const std::string& text, int t_out) {
  std::vector<int> ms;
  if (text.empty()) {
    for (int h : {80, 160, 320, 400, 560, 1000}) {
      if (h / SkeletonSequence::kFrameIntervalMs <= t_out) ms.push_back(h);
    }
    return ms;
  }
  std::string valid = "valid horizons:";
  for (int f = 1; f <= t_out; ++f) {
    valid += (f == 1 ? " " : ", ") + std::to_string(f * SkeletonSequence::kFrameIntervalMs);
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int h = parse_int("horizons-ms", trim(item));
    if (h <= 0 || h % SkeletonSequence::kFrameIntervalMs != 0 ||
        h / SkeletonSequence::kFrameIntervalMs > t_out) {
      throw ConfigError("horizon " + std::to_string(h) + " ms is not reachable; " + valid);
    }
    ms.push_back(h);
  }
  if (ms.empty()) throw ConfigError("no horizons requested; " + valid);
  return ms;
}

int do_eval(const EvalArgs& a) {
  const ModelParams params = load_checkpoint(a.ckpt);
  const std::vector<int> horizons = parse_horizons(a.horizons, params.hyper.t_out);

  Dataset ds = load_dataset(a.data_dir, a.root_joint);
  if (ds.n_j != params.hyper.n_j) {
    throw ShapeError("data has " + std::to_string(ds.n_j) + " joints after preprocessing, checkpoint expects " +
                     std::to_string(params.hyper.n_j));
  }
  const auto windows = windows_of(split_view(ds, a.split), params.hyper.t, params.hyper.t_out, a.stride);
  if (windows.empty()) throw ConfigError("split '" + a.split + "' yields no evaluation windows");

  const auto predictions = predict_batch(params, windows);

  std::string csv = "ms,frame,model_mpjpe,zero_velocity_mpjpe,constant_velocity_mpjpe\n";
  std::printf("%6s %6s %12s %12s %12s   (%zu windows)\n", "ms", "frame", "model", "zero_vel",
              "const_vel", windows.size());
  for (int h : horizons) {
    const int frame = h / SkeletonSequence::kFrameIntervalMs;
    double m = 0.0, zv = 0.0, cv = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& w = windows[i];
      m += mpjpe(predictions[i], w.target, frame);
      zv += mpjpe(zero_velocity_baseline(w.input, params.hyper.t_out), w.target, frame);
      cv += mpjpe(constant_velocity_baseline(w.input, params.hyper.t_out), w.target, frame);
    }
    const double n = static_cast<double>(windows.size());
    m /= n;
    zv /= n;
    cv /= n;
    std::printf("%6d %6d %12.4f %12.4f %12.4f\n", h, frame, m, zv, cv);
    char line[160];
    std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%.6f\n", h, frame, m, zv, cv);
    csv += line;
  }

  if (!a.out_csv.empty()) {
    const std::filesystem::path tmp = a.out_csv + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw IoError("cannot write " + tmp.string());
      out << csv;
    }
    std::filesystem::rename(tmp, a.out_csv);
    std::cout << "metrics: " << a.out_csv << "\n";
  }
  return 0;
}

// --- predict ---

struct PredictArgs {
  std::string ckpt;
  std::string input_csv;
  std::string out_csv;
  int root_joint = 0;
};

int do_predict(const PredictArgs& a) {
  const ModelParams params = load_checkpoint(a.ckpt);
  const SkeletonSequence raw = load_csv(a.input_csv);
  PreprocessInfo info;
  const SkeletonSequence seq = preprocess(raw, a.root_joint, &info);
  if (static_cast<int>(seq.frames.size()) < params.hyper.t) {
    throw ShapeError("input has " + std::to_string(seq.frames.size()) + " frames, model needs >= " +
                     std::to_string(params.hyper.t));
  }
  if (seq.n_j != params.hyper.n_j) {
    throw ShapeError("input has " + std::to_string(seq.n_j) + " joints after preprocessing, checkpoint expects " +
                     std::to_string(params.hyper.n_j));
  }

  const std::span<const Pose> tail(seq.frames.data() + seq.frames.size() - params.hyper.t,
                                   static_cast<std::size_t>(params.hyper.t));
  const std::vector<Pose> predicted = predict_window(params, tail);

  // Reinsert dropped joints at their constant root-centered values.
  SkeletonSequence out;
  out.name = "prediction";
  out.n_j = info.original_n_j;
  for (const Pose& p : predicted) {
    Pose full(static_cast<std::size_t>(info.original_n_j) * 3);
    std::size_t kept = 0, dropped = 0;
    for (int j = 0; j < info.original_n_j; ++j) {
      if (dropped < info.dropped.size() && info.dropped[dropped] == j) {
        for (int d = 0; d < 3; ++d) full[static_cast<std::size_t>(j) * 3 + d] = info.dropped_values[dropped][static_cast<std::size_t>(d)];
        ++dropped;
      } else {
        for (int d = 0; d < 3; ++d) full[static_cast<std::size_t>(j) * 3 + d] = p[kept * 3 + d];
        ++kept;
      }
    }
    out.frames.push_back(std::move(full));
  }
  save_csv(out, a.out_csv);
  std::cout << "wrote " << out.frames.size() << " predicted frames to " << a.out_csv << "\n";
  return 0;
}

// --- gradcheck ---

struct GradArgs {
  std::uint64_t seed = 1;
  bool full = false;
};

int do_gradcheck(const GradArgs& a) {
  const auto entries = run_grad_suite(a.seed, a.full);
  bool ok = true;
  double worst = 0.0;
  for (const auto& e : entries) {
    const bool pass = e.report.passes();
    ok = ok && pass;
    worst = std::max(worst, e.report.max_rel_err);
    std::printf("%-16s max rel err %.3e  (%d coords, worst %s)  %s\n", e.component.c_str(),
                e.report.max_rel_err, e.report.coords_checked, e.report.worst_coord.c_str(),
                pass ? "ok" : "FAIL");
  }
  std::printf("gradient suite %s (worst %.3e, tolerance 1e-3)\n", ok ? "passed" : "FAILED", worst);
  return ok ? 0 : 3;
}

}  // namespace

std::map<std::string, std::string> parse_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ": line " + std::to_string(row) + " is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(path.string() + ": line " + std::to_string(row) + " has an empty key");
    kv[key] = value;
  }
  return kv;
}

void apply_config_file(TrainConfig& config, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "t") {
      config.hyper.t = parse_int(key, value);
    } else if (key == "t_out") {
      config.hyper.t_out = parse_int(key, value);
    } else if (key == "n_j") {
      config.hyper.n_j = parse_int(key, value);
    } else if (key == "c") {
      config.hyper.c = parse_int(key, value);
    } else if (key == "k") {
      config.hyper.k = parse_int(key, value);
    } else if (key == "l_en") {
      config.hyper.l_en = parse_int(key, value);
    } else if (key == "l_de") {
      config.hyper.l_de = parse_int(key, value);
    } else if (key == "n") {
      config.hyper.n = parse_int(key, value);
    } else if (key == "alpha") {
      config.loss_alpha = parse_float(key, value);
    } else if (key == "lr") {
      config.lr = parse_float(key, value);
    } else if (key == "steps") {
      config.steps = parse_int(key, value);
    } else if (key == "batch") {
      config.batch = parse_int(key, value);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "save_interval") {
      config.save_interval = parse_int(key, value);
    } else if (key == "loss") {
      config.loss_variant = weight_variant_from_name(value);
    } else if (key == "ablate") {
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) apply_ablation(config.hyper, trim(item));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"SDMTL: multi-grained trajectory network for 3D human motion prediction"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic motion dataset");
  s_synth->add_option("--out", synth.out_dir, "output directory")->required();
  s_synth->add_option("--sequences", synth.sequences, "number of sequences");
  s_synth->add_option("--frames", synth.frames, "frames per sequence");
  s_synth->add_option("--joints", synth.joints, "joints per pose");
  s_synth->add_option("--seed", synth.seed, "generator seed");

  TrainArgs train_args;
  auto* s_train = app.add_subcommand("train", "train a model on a directory of CSV sequences");
  s_train->add_option("--config", train_args.config_file, "key=value config file");
  s_train->add_option("--data", train_args.data_dir, "dataset directory")->required();
  s_train->add_option("--out", train_args.out_ckpt, "checkpoint path")->required();
  s_train->add_option("--seed", train_args.seed, "training seed (overrides config)");
  s_train->add_option("--loss", train_args.loss, "loss variant: exp, linear or uniform");
  s_train->add_option("--ablate", train_args.ablate, "disable a component: ted, amg, rc or ei");
  s_train->add_option("--steps", train_args.steps, "training steps (overrides config)");
  s_train->add_option("--batch", train_args.batch, "batch size (overrides config)");
  s_train->add_option("--lr", train_args.lr, "learning rate (overrides config)");
  s_train->add_option("--root-joint", train_args.root_joint, "root joint column");
  s_train->add_option("--stride", train_args.stride, "window stride");
  s_train->add_flag("--quiet", train_args.quiet, "suppress per-step output");

  EvalArgs eval_args;
  auto* s_eval = app.add_subcommand("eval", "report MPJPE against baselines at fixed horizons");
  s_eval->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  s_eval->add_option("--data", eval_args.data_dir, "dataset directory")->required();
  s_eval->add_option("--horizons-ms", eval_args.horizons, "comma-separated horizons in ms");
  s_eval->add_option("--out", eval_args.out_csv, "metrics CSV path");
  s_eval->add_option("--split", eval_args.split, "train, val, test or all");
  s_eval->add_option("--root-joint", eval_args.root_joint, "root joint column");
  s_eval->add_option("--stride", eval_args.stride, "window stride");

  PredictArgs predict_args;
  auto* s_predict = app.add_subcommand("predict", "predict future frames for one sequence");
  s_predict->add_option("--ckpt", predict_args.ckpt, "checkpoint path")->required();
  s_predict->add_option("--input", predict_args.input_csv, "input sequence CSV")->required();
  s_predict->add_option("--out", predict_args.out_csv, "output CSV")->required();
  s_predict->add_option("--root-joint", predict_args.root_joint, "root joint column");

  GradArgs grad_args;
  auto* s_grad = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  s_grad->add_option("--seed", grad_args.seed, "fixture seed");
  s_grad->add_flag("--full", grad_args.full, "check every coordinate (no subsampling)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (s_synth->parsed()) return do_synth(synth);
    if (s_train->parsed()) return do_train(train_args);
    if (s_eval->parsed()) return do_eval(eval_args);
    if (s_predict->parsed()) return do_predict(predict_args);
    if (s_grad->parsed()) return do_gradcheck(grad_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ContractError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace sdmtl
