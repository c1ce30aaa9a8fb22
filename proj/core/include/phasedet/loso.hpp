#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phasedet/combined.hpp"
#include "phasedet/metrics.hpp"
#include "phasedet/recording.hpp"

namespace phasedet {

enum class EvalMethod { kRf, kHmmSignal, kCombined };

EvalMethod eval_method_from_string(std::string_view s);
std::string_view to_string(EvalMethod method);

// One configuration for a full evaluation run. The forest/combined sub-seeds
// are derived per fold from `seed`.
struct EvalSpec {
  EvalMethod method = EvalMethod::kRf;
  FeatureMode mode = FeatureMode::kRaw;
  std::size_t window = kDefaultMedianWindow;
  ForestParams forest;
  DecodeMode decode = DecodeMode::kViterbi;
  TransitionStructure structure = TransitionStructure::kUpperTriangular;
  double smoothing = 1e-6;
  double split_fraction = 0.5;
  BaumWelchOptions bw;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Decoded sequences kept per fold so timelines can be rendered afterwards.
struct FoldPrediction {
  std::string held_out_id;
  std::vector<int> truth;
  std::vector<std::pair<std::string, std::vector<int>>> rows;
};

// Trains the requested method on all-but-one surgery and scores the held-out
// one, for every surgery in turn. Folds run in parallel up to spec.jobs;
// results are merged in input order, so reports are reproducible.
MetricsReport loso_cross_validate(const std::vector<SurgeryRecording>& surgeries,
                                  const EvalSpec& spec,
                                  std::vector<FoldPrediction>* fold_predictions = nullptr);

}  // namespace phasedet
