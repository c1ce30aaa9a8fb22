#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasedet/combined.hpp"
#include "phasedet/phase.hpp"

namespace phasedet {

// Fraction of frames with matching labels.
double frame_accuracy(std::span<const int> truth, std::span<const int> predicted);

// Per phase: |both == p| / |either == p|; nullopt when the union is empty.
std::array<std::optional<double>, kNumPhases> jaccard_scores(std::span<const int> truth,
                                                             std::span<const int> predicted);

// Mean over phases with a defined score.
double mean_jaccard(const std::array<std::optional<double>, kNumPhases>& scores);

struct FoldResult {
  std::string held_out_id;
  double accuracy = 0.0;
  std::array<std::optional<double>, kNumPhases> jaccard_per_phase{};
  double mean_jaccard = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::array<std::optional<double>, kNumPhases> jaccard_per_phase{};
  double mean_jaccard = 0.0;
  Confusion confusion{};
  std::vector<FoldResult> per_fold;
};

// Pooled metrics recomputed from a confusion matrix.
double accuracy_from_confusion(const Confusion& confusion);
std::array<std::optional<double>, kNumPhases> jaccard_from_confusion(const Confusion& confusion);

// JSON with phases keyed by canonical names.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

// One line per fold: fold,accuracy,mean_jaccard.
std::string report_to_csv(const MetricsReport& report);

}  // namespace phasedet
