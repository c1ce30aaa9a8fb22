#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasedet/features.hpp"
#include "phasedet/forest.hpp"
#include "phasedet/hmm.hpp"
#include "phasedet/recording.hpp"

namespace phasedet {

enum class DecodeMode { kFiltering, kViterbi };

DecodeMode decode_mode_from_string(std::string_view s);
std::string_view to_string(DecodeMode mode);

struct CombinedParams {
  ForestParams forest;
  FeatureMode mode = FeatureMode::kRaw;
  std::size_t window = kDefaultMedianWindow;
  double split_fraction = 0.5;
  std::uint64_t split_seed = 0;
  double smoothing = 1e-6;
  DecodeMode decode = DecodeMode::kViterbi;
  TransitionStructure structure = TransitionStructure::kUpperTriangular;
  BaumWelchOptions bw;
};

using Confusion = std::array<std::array<std::int64_t, kNumPhases>, kNumPhases>;

struct SurgerySplit {
  std::vector<std::size_t> part1;  // forest training
  std::vector<std::size_t> part2;  // emission calibration
};

struct CombinedProvenance {
  std::vector<std::string> forest_ids;
  std::vector<std::string> hmm_ids;
  Confusion confusion{};
  std::vector<std::string> warnings;
};

struct CombinedModel {
  RandomForest forest;
  TransitionModel trans;
  DiscreteEmissionTable emission;
  CombinedParams params;
  CombinedProvenance provenance;
};

enum class PredictMethod { kRf, kHmmFiltering, kHmmViterbi };

// Deterministic shuffle-and-cut at surgery granularity. Part1 gets
// max(1, round(fraction * n)) surgeries, clamped so both parts are non-empty.
SurgerySplit split_training_surgeries(std::size_t n_surgeries, double fraction,
                                      std::uint64_t seed);

// counts[i][j] = frames with true phase i predicted as j.
Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted);
void accumulate_confusion(Confusion& counts, std::span<const int> truth,
                          std::span<const int> predicted);

// Row-normalizes confusion counts into an emission table; rows with no mass
// become uniform. With smoothing > 0 every entry is positive.
DiscreteEmissionTable emission_from_confusion(const Confusion& counts, double smoothing);

// The two-stage training scheme: the forest learns on one part of the
// training surgeries, the other part calibrates the emission table from the
// forest's confusion matrix and refines the transitions with Baum-Welch over
// the forest's output symbol sequences.
CombinedModel train_combined(const std::vector<SurgeryRecording>& training,
                             const CombinedParams& params, int jobs = 1);

// Per-frame forest votes, optionally smoothed by the HMM (causal filtering or
// whole-sequence Viterbi).
std::vector<int> predict_phases(const CombinedModel& model, const SurgeryRecording& rec,
                                PredictMethod method);

// Forest symbols for a recording under the model's feature mode.
std::vector<int> rf_symbols(const CombinedModel& model, const SurgeryRecording& rec);

std::string combined_to_json(const CombinedModel& model);
CombinedModel combined_from_json(const std::string& text);
void save_combined(const CombinedModel& model, const std::filesystem::path& path);
CombinedModel load_combined(const std::filesystem::path& path);

}  // namespace phasedet
