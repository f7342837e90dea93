#include "sdmtl/schedule.hpp"

#include <algorithm>

namespace sdmtl {

LevelSchedule build_schedule(int t) {
  if (t < 2) throw ConfigError("build_schedule: input length must be >= 2, got " + std::to_string(t));

  LevelSchedule s;
  s.t = t;
  s.dyadic_depth = 1;
  while ((1 << s.dyadic_depth) < t) ++s.dyadic_depth;
  s.extra_levels = (t - 1) - s.dyadic_depth;

  // Supports of the previous level's outputs; level 0 is one encoder frame
  // per output.
  std::vector<std::pair<int, int>> prev_support(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) prev_support[static_cast<std::size_t>(i)] = {i + 1, i + 1};

  for (int level = 1; level <= s.dyadic_depth; ++level) {
    std::vector<ScheduleNode> nodes;
    std::vector<std::pair<int, int>> support;
    const int m = static_cast<int>(prev_support.size());
    const long long span = 1ll << level;
    for (int i = 0; i < m; i += 2) {
      ScheduleNode node;
      node.input_level = level - 1;
      const int j = static_cast<int>(nodes.size()) + 1;
      node.extra_frame = static_cast<int>(std::min<long long>(span * j, t));
      if (i + 1 < m) {
        node.prev_index = i;
        node.cur_index = i + 1;
        node.support_begin = prev_support[static_cast<std::size_t>(i)].first;
        node.support_end = prev_support[static_cast<std::size_t>(i + 1)].second;
      } else {
        node.carry_index = i;
        node.support_begin = prev_support[static_cast<std::size_t>(i)].first;
        node.support_end = prev_support[static_cast<std::size_t>(i)].second;
      }
      support.emplace_back(node.support_begin, node.support_end);
      nodes.push_back(node);
    }
    s.levels.push_back(std::move(nodes));
    prev_support = std::move(support);
  }

  // Levels past the dyadic top re-consume the pair that fed the final global
  // block, with fresh parameters per level.
  for (int level = s.dyadic_depth + 1; level <= t - 1; ++level) {
    ScheduleNode node;
    node.input_level = s.dyadic_depth - 1;
    node.prev_index = 0;
    node.cur_index = 1;
    node.extra_frame = t;
    node.support_begin = 1;
    node.support_end = t;
    s.levels.push_back({node});
  }

  return s;
}

}  // namespace sdmtl
