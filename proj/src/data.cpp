#include "sdmtl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sdmtl/rng.hpp"

namespace sdmtl {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

SkeletonSequence load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() % 3 != 0 || header.empty()) {
    throw ParseError(path.string() + ": header has " + std::to_string(header.size()) +
                     " columns, not divisible by 3");
  }
  const int n_j = static_cast<int>(header.size() / 3);
  static const char* axis = "xyz";
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string expect = "j" + std::to_string(c / 3) + "_" + axis[c % 3];
    if (trim(header[c]) != expect) {
      throw ParseError(path.string() + ": header column " + std::to_string(c + 1) + " is '" +
                       header[c] + "', expected '" + expect + "'");
    }
  }

  SkeletonSequence seq;
  seq.name = path.stem().string();
  seq.n_j = n_j;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    Pose pose(header.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(path.string() + ": row " + std::to_string(row) + " column " +
                         std::to_string(c + 1) + ": '" + cell + "' is not a number");
      }
      if (!std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(row) + " column " +
                         std::to_string(c + 1) + ": non-finite value");
      }
      pose[c] = v;
    }
    seq.frames.push_back(std::move(pose));
  }
  return seq;
}

void save_csv(const SkeletonSequence& seq, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    static const char* axis = "xyz";
    for (int j = 0; j < seq.n_j; ++j) {
      for (int d = 0; d < 3; ++d) {
        if (j || d) out << ',';
        out << 'j' << j << '_' << axis[d];
      }
    }
    out << '\n';
    char buf[64];
    for (const Pose& pose : seq.frames) {
      for (std::size_t c = 0; c < pose.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(pose[c]));
        if (c) out << ',';
        out << buf;
      }
      out << '\n';
    }
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SkeletonSequence preprocess(const SkeletonSequence& seq, int root_joint, PreprocessInfo* info) {
  if (seq.n_j < 2) throw ConfigError("preprocess: needs at least 2 joints, got " + std::to_string(seq.n_j));
  if (seq.frames.size() < 2) {
    throw ConfigError("preprocess: sequence '" + seq.name + "' has " +
                      std::to_string(seq.frames.size()) + " frames, need >= 2");
  }
  if (root_joint < 0 || root_joint >= seq.n_j) {
    throw ConfigError("preprocess: root joint " + std::to_string(root_joint) + " outside 0.." +
                      std::to_string(seq.n_j - 1));
  }

  // Root-center.
  std::vector<Pose> centered(seq.frames.size(), Pose(static_cast<std::size_t>(seq.n_j) * 3));
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const Pose& src = seq.frames[f];
    Pose& dst = centered[f];
    const float* root = src.data() + static_cast<std::size_t>(root_joint) * 3;
    for (int j = 0; j < seq.n_j; ++j) {
      for (int d = 0; d < 3; ++d) {
        dst[static_cast<std::size_t>(j) * 3 + d] = src[static_cast<std::size_t>(j) * 3 + d] - root[d];
      }
    }
  }

  constexpr float kConstTol = 1e-6f;
  std::vector<bool> keep(static_cast<std::size_t>(seq.n_j), false);
  keep[static_cast<std::size_t>(root_joint)] = true;
  int moving = 0;
  for (int j = 0; j < seq.n_j; ++j) {
    if (j == root_joint) continue;
    bool constant = true;
    const Pose& first = centered[0];
    for (std::size_t f = 1; f < centered.size() && constant; ++f) {
      for (int d = 0; d < 3; ++d) {
        if (std::abs(centered[f][static_cast<std::size_t>(j) * 3 + d] -
                     first[static_cast<std::size_t>(j) * 3 + d]) > kConstTol) {
          constant = false;
          break;
        }
      }
    }
    if (!constant) {
      keep[static_cast<std::size_t>(j)] = true;
      ++moving;
    }
  }
  if (moving == 0) {
    throw NumericError("degenerate sequence '" + seq.name + "': no joint moves relative to the root");
  }

  if (info) {
    info->root_joint = root_joint;
    info->original_n_j = seq.n_j;
    info->dropped.clear();
    info->dropped_values.clear();
    for (int j = 0; j < seq.n_j; ++j) {
      if (keep[static_cast<std::size_t>(j)]) continue;
      info->dropped.push_back(j);
      info->dropped_values.push_back({centered[0][static_cast<std::size_t>(j) * 3 + 0],
                                      centered[0][static_cast<std::size_t>(j) * 3 + 1],
                                      centered[0][static_cast<std::size_t>(j) * 3 + 2]});
    }
  }

  SkeletonSequence out;
  out.name = seq.name;
  out.n_j = static_cast<int>(std::count(keep.begin(), keep.end(), true));
  out.frames.resize(centered.size());
  for (std::size_t f = 0; f < centered.size(); ++f) {
    Pose& dst = out.frames[f];
    dst.reserve(static_cast<std::size_t>(out.n_j) * 3);
    for (int j = 0; j < seq.n_j; ++j) {
      if (!keep[static_cast<std::size_t>(j)]) continue;
      for (int d = 0; d < 3; ++d) dst.push_back(centered[f][static_cast<std::size_t>(j) * 3 + d]);
    }
  }
  return out;
}

std::vector<SampleWindow> make_windows(const SkeletonSequence& seq, int t, int t_out, int stride) {
  if (t < 1 || t_out < 1 || stride < 1) {
    throw ConfigError("make_windows: t, t_out and stride must be positive");
  }
  std::vector<SampleWindow> windows;
  const int len = static_cast<int>(seq.frames.size());
  if (len < t + t_out) return windows;
  for (int off = 0; off + t + t_out <= len; off += stride) {
    SampleWindow w;
    w.source_offset = off;
    w.input.assign(seq.frames.begin() + off, seq.frames.begin() + off + t);
    w.target.assign(seq.frames.begin() + off + t, seq.frames.begin() + off + t + t_out);
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<SkeletonSequence> synth_generate(int n_seq, int n_frames, int n_j, std::uint64_t seed) {
  if (n_seq < 1 || n_frames < 1 || n_j < 2) {
    throw ConfigError("synth_generate: need n_seq >= 1, n_frames >= 1, n_j >= 2");
  }
  std::vector<SkeletonSequence> out;
  out.reserve(static_cast<std::size_t>(n_seq));
  for (int s = 0; s < n_seq; ++s) {
    SeededStream rng(seed, "synth.seq" + std::to_string(s));
    SkeletonSequence seq;
    char name[32];
    std::snprintf(name, sizeof name, "seq_%04d", s);
    seq.name = name;
    seq.n_j = n_j;

    struct Wave {
      float a, omega, phi, v, c;
    };
    std::vector<Wave> waves(static_cast<std::size_t>(n_j) * 3);
    for (auto& w : waves) {
      w.a = rng.next_uniform(20.0f, 120.0f);
      const float period = rng.next_uniform(20.0f, 80.0f);
      w.omega = 2.0f * std::numbers::pi_v<float> / period;
      w.phi = rng.next_uniform(0.0f, 2.0f * std::numbers::pi_v<float>);
      w.v = rng.next_uniform(-3.0f, 3.0f);
      w.c = rng.next_uniform(-500.0f, 500.0f);
    }

    seq.frames.resize(static_cast<std::size_t>(n_frames), Pose(static_cast<std::size_t>(n_j) * 3));
    for (int f = 0; f < n_frames; ++f) {
      Pose& pose = seq.frames[static_cast<std::size_t>(f)];
      const float tf = static_cast<float>(f);
      for (std::size_t k = 0; k < waves.size(); ++k) {
        const Wave& w = waves[k];
        pose[k] = w.a * std::sin(w.omega * tf + w.phi) + w.v * tf + w.c;
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace sdmtl
