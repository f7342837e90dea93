#pragma once

#include <vector>

#include "sdmtl/errors.hpp"

namespace sdmtl {

/// One unit of work in a pyramid level: either a block application on a pair
/// of inputs, or a carry that forwards an unpaired input unchanged.
struct ScheduleNode {
  int input_level = 0;  // level whose outputs the indices refer to; 0 = encoder frames
  int prev_index = -1;  // earlier member of the pair            (block nodes)
  int cur_index = -1;   // later member of the pair              (block nodes)
  int carry_index = -1; // forwarded output                      (carry nodes)
  int extra_frame = 0;  // 1-based encoder frame for the extra interface
  int support_begin = 0;  // 1-based inclusive input-frame range this node summarizes
  int support_end = 0;

  bool is_carry() const { return carry_index >= 0; }
  int support_size() const { return support_end - support_begin + 1; }
};

/// Pairing plan for the whole pyramid: levels 1..T-1, where the first
/// ceil(log2 T) levels halve the node count by pairing consecutive outputs
/// (odd leftovers carried), and the remaining levels each re-summarize the
/// final global pair.
struct LevelSchedule {
  int t = 0;
  int dyadic_depth = 0;
  int extra_levels = 0;
  std::vector<std::vector<ScheduleNode>> levels;  // levels[l-1], size T-1

  int level_count() const { return static_cast<int>(levels.size()); }
};

LevelSchedule build_schedule(int t);

}  // namespace sdmtl
