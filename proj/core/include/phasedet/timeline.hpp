#pragma once

#include <string>
#include <vector>

namespace phasedet {

struct TimelineRow {
  std::string caption;
  std::vector<int> labels;
};

// Standalone SVG with one horizontal ribbon per row, ground truth first.
// Each maximal run of a constant label becomes one rectangle in the fixed
// 7-color phase palette; a time axis in minutes and a phase legend are
// included. All sequences must have the same non-zero length.
std::string render_timeline_svg(const std::vector<int>& truth,
                                const std::vector<TimelineRow>& rows);

}  // namespace phasedet
