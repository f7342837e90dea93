#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sdmtl/errors.hpp"

namespace sdmtl {

/// One frame: N_j joints, 3 coordinates each, millimeters, flat (x,y,z) order.
using Pose = std::vector<float>;

struct SkeletonSequence {
  std::string name;
  int n_j = 0;
  std::vector<Pose> frames;
  static constexpr int kFrameIntervalMs = 40;

  std::size_t frame_count() const { return frames.size(); }
};

/// Columns "j0_x,j0_y,j0_z,j1_x,..." with one frame per row. Parse failures
/// name the row and column.
SkeletonSequence load_csv(const std::filesystem::path& path);

/// Writes with 9 significant digits so a reload is float32-exact. Atomic
/// (temp file + rename).
void save_csv(const SkeletonSequence& seq, const std::filesystem::path& path);

struct PreprocessInfo {
  int root_joint = 0;
  int original_n_j = 0;
  std::vector<int> dropped;                        // original joint indices, ascending
  std::vector<std::array<float, 3>> dropped_values;  // their constant root-centered values
};

/// Root-centers every frame on the root joint, then drops non-root joints
/// whose coordinates stay constant (within 1e-6 mm) across the sequence.
/// The root joint is always retained and is exactly (0,0,0) afterwards.
/// Throws NumericError("degenerate sequence...") when no moving joint
/// remains.
SkeletonSequence preprocess(const SkeletonSequence& seq, int root_joint = 0,
                            PreprocessInfo* info = nullptr);

struct SampleWindow {
  std::vector<Pose> input;   // T frames
  std::vector<Pose> target;  // T_out frames
  int source_offset = 0;     // frame index of input[0] in the source sequence
};

/// Sliding windows at the given stride; short sequences yield an empty list.
std::vector<SampleWindow> make_windows(const SkeletonSequence& seq, int t, int t_out, int stride = 1);

/// Per joint and coordinate: a*sin(w*t + phi) + v*t + c, with amplitudes
/// 20-120 mm, periods 20-80 frames and drift up to 3 mm/frame drawn from the
/// seeded stream. Joint 0 carries the global translation.
std::vector<SkeletonSequence> synth_generate(int n_seq, int n_frames, int n_j, std::uint64_t seed);

}  // namespace sdmtl
