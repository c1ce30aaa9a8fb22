#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasedet/recording.hpp"

namespace phasedet {

enum class FeatureMode { kRaw, kFiltered, kAugmented };

FeatureMode feature_mode_from_string(std::string_view s);
std::string_view to_string(FeatureMode mode);

// 17 / 21 / 45 columns for raw / filtered / augmented.
int feature_count(FeatureMode mode);

inline constexpr std::size_t kDefaultMedianWindow = 120;

// Per-frame feature vectors, row-major.
struct FeatureMatrix {
  FeatureMode mode = FeatureMode::kRaw;
  std::vector<std::string> names;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * n_cols, n_cols};
  }
};

// Sliding median with a centered window truncated at the boundaries. An
// even-sized window takes the mean of the two middle values. The nominal
// window covers (window-1)/2 frames to the left and window/2 to the right.
std::vector<double> median_filter(std::span<const double> series, std::size_t window);

// Elementwise raw - filtered.
std::vector<double> noise_component(std::span<const double> raw, std::span<const double> filtered);

// Running sum of a 0/1 sequence, inclusive of the current frame.
std::vector<std::int64_t> cumulative_sum(std::span<const int> series);

// Running count of 0->1 transitions; a leading 1 counts as an edge.
std::vector<std::int64_t> rising_edge_sum(std::span<const int> series);

// Column layout:
//   raw:       b01..b12, a01..a04, t
//   filtered:  b01..b12, a01_med..a04_med, a01_noise..a04_noise, t
//   augmented: filtered columns, then b01_cum..b12_cum, b01_edges..b12_edges
FeatureMatrix build_features(const SurgeryRecording& rec, FeatureMode mode,
                             std::size_t window = kDefaultMedianWindow);

}  // namespace phasedet
