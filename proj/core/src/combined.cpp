#include "phasedet/combined.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "phasedet/error.hpp"
#include "phasedet/io.hpp"
#include "phasedet/rng.hpp"

namespace phasedet {

namespace {

constexpr std::uint64_t kSplitStream = 11;

}  // namespace

DecodeMode decode_mode_from_string(std::string_view s) {
  if (s == "filtering") return DecodeMode::kFiltering;
  if (s == "viterbi") return DecodeMode::kViterbi;
  throw DataError("unknown decode mode: " + std::string(s));
}

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kFiltering: return "filtering";
    case DecodeMode::kViterbi: return "viterbi";
  }
  throw DataError("invalid decode mode");
}

SurgerySplit split_training_surgeries(std::size_t n_surgeries, double fraction,
                                      std::uint64_t seed) {
  if (n_surgeries < 2) {
    throw DataError("split_training_surgeries: need at least 2 surgeries");
  }
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DataError("split_training_surgeries: fraction must be in (0,1)");
  }
  std::vector<std::size_t> order(n_surgeries);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kSplitStream));
  for (std::size_t i = n_surgeries - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_index(i + 1);
    std::swap(order[i], order[j]);
  }

  std::size_t k = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n_surgeries)));
  k = std::max<std::size_t>(1, std::min(k, n_surgeries - 1));

  SurgerySplit split;
  split.part1.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  split.part2.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(split.part1.begin(), split.part1.end());
  std::sort(split.part2.begin(), split.part2.end());
  return split;
}

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted) {
  Confusion counts{};
  accumulate_confusion(counts, truth, predicted);
  return counts;
}

void accumulate_confusion(Confusion& counts, std::span<const int> truth,
                          std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw DataError("confusion_matrix: length mismatch");
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!is_valid_phase(truth[t]) || !is_valid_phase(predicted[t])) {
      throw DataError("confusion_matrix: label out of range");
    }
    ++counts[static_cast<std::size_t>(truth[t])][static_cast<std::size_t>(predicted[t])];
  }
}

DiscreteEmissionTable emission_from_confusion(const Confusion& counts, double smoothing) {
  if (smoothing < 0.0) throw DataError("emission_from_confusion: negative smoothing");
  DiscreteEmissionTable table;
  table.n_states = kNumPhases;
  table.n_symbols = kNumPhases;
  table.b.assign(kNumPhases * kNumPhases, 0.0);
  for (int s = 0; s < kNumPhases; ++s) {
    std::int64_t row_sum = 0;
    for (int o = 0; o < kNumPhases; ++o) {
      row_sum += counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(o)];
    }
    if (row_sum == 0 && smoothing == 0.0) {
      for (int o = 0; o < kNumPhases; ++o) table.at(s, o) = 1.0 / kNumPhases;
      continue;
    }
    const double denom = static_cast<double>(row_sum) + kNumPhases * smoothing;
    for (int o = 0; o < kNumPhases; ++o) {
      table.at(s, o) =
          (static_cast<double>(counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(o)]) +
           smoothing) /
          denom;
    }
  }
  return table;
}

namespace {

struct ConcatFeatures {
  FeatureMatrix features;
  std::vector<int> labels;
};

ConcatFeatures concat_features(const std::vector<SurgeryRecording>& surgeries,
                               std::span<const std::size_t> indices, FeatureMode mode,
                               std::size_t window) {
  ConcatFeatures out;
  out.features.mode = mode;
  out.features.n_cols = static_cast<std::size_t>(feature_count(mode));
  for (const std::size_t idx : indices) {
    const auto m = build_features(surgeries[idx], mode, window);
    if (out.features.names.empty()) out.features.names = m.names;
    out.features.values.insert(out.features.values.end(), m.values.begin(), m.values.end());
    out.features.n_rows += m.n_rows;
    out.labels.insert(out.labels.end(), surgeries[idx].labels.begin(),
                      surgeries[idx].labels.end());
  }
  return out;
}

std::vector<int> predict_rows(const RandomForest& model, const FeatureMatrix& m) {
  std::vector<int> out(m.n_rows);
  for (std::size_t t = 0; t < m.n_rows; ++t) out[t] = forest_predict(model, m.row(t));
  return out;
}

}  // namespace

CombinedModel train_combined(const std::vector<SurgeryRecording>& training,
                             const CombinedParams& params, int jobs) {
  if (training.size() < 2) {
    throw DataError("train_combined: need at least 2 labeled surgeries");
  }
  for (const auto& rec : training) {
    if (!rec.labeled()) throw DataError("train_combined: unlabeled surgery " + rec.id);
  }

  CombinedModel model;
  model.params = params;

  const auto split =
      split_training_surgeries(training.size(), params.split_fraction, params.split_seed);
  for (const std::size_t i : split.part1) model.provenance.forest_ids.push_back(training[i].id);
  for (const std::size_t i : split.part2) model.provenance.hmm_ids.push_back(training[i].id);

  // Stage 1: forest on part1.
  const auto part1 = concat_features(training, split.part1, params.mode, params.window);
  model.forest = train_forest(part1.features, part1.labels, params.forest, jobs);
  model.params.forest = model.forest.params;

  // Stage 2: classify part2 and calibrate the emission table from the
  // resulting confusion matrix.
  Confusion confusion{};
  std::vector<std::vector<int>> part2_symbols;
  std::vector<std::vector<int>> part2_labels;
  for (const std::size_t idx : split.part2) {
    const auto m = build_features(training[idx], params.mode, params.window);
    auto symbols = predict_rows(model.forest, m);
    accumulate_confusion(confusion, training[idx].labels, symbols);
    part2_symbols.push_back(std::move(symbols));
    part2_labels.push_back(training[idx].labels);
  }
  model.provenance.confusion = confusion;
  for (int p = 0; p < kNumPhases; ++p) {
    std::int64_t row_sum = 0;
    for (int o = 0; o < kNumPhases; ++o) {
      row_sum += confusion[static_cast<std::size_t>(p)][static_cast<std::size_t>(o)];
    }
    if (row_sum == 0) {
      model.provenance.warnings.push_back("phase '" + std::string(phase_name(p)) +
                                          "' absent from emission calibration split; "
                                          "emission row is uniform");
    }
  }
  model.emission = emission_from_confusion(confusion, params.smoothing);

  // Stage 3: transitions from part2 ground truth, refined over the forest's
  // symbol sequences with emissions held fixed.
  const auto init =
      init_transitions_from_labels(part2_labels, params.structure, params.smoothing);
  auto bw_opts = params.bw;
  bw_opts.update_emissions = false;
  const auto refined = baum_welch(init, model.emission, part2_symbols, bw_opts);
  model.trans = refined.trans;
  return model;
}

std::vector<int> rf_symbols(const CombinedModel& model, const SurgeryRecording& rec) {
  const auto m = build_features(rec, model.params.mode, model.params.window);
  if (m.n_cols != model.forest.n_features()) {
    throw DataError("predict_phases: feature dimension mismatch");
  }
  return predict_rows(model.forest, m);
}

std::vector<int> predict_phases(const CombinedModel& model, const SurgeryRecording& rec,
                                PredictMethod method) {
  auto symbols = rf_symbols(model, rec);
  if (method == PredictMethod::kRf) return symbols;

  const auto scores = scores_from_discrete(model.emission, symbols);
  if (method == PredictMethod::kHmmViterbi) {
    return viterbi_decode(model.trans, scores);
  }
  const auto forward = forward_filter(model.trans, scores);
  std::vector<int> out(symbols.size());
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    int best = 0;
    for (int s = 1; s < kNumPhases; ++s) {
      if (forward.at(t, s) > forward.at(t, best)) best = s;
    }
    out[t] = best;
  }
  return out;
}

std::string combined_to_json(const CombinedModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = "combined";
  j["params"] = {{"mode", std::string(to_string(model.params.mode))},
                 {"window", model.params.window},
                 {"split_fraction", model.params.split_fraction},
                 {"split_seed", model.params.split_seed},
                 {"smoothing", model.params.smoothing},
                 {"decode", std::string(to_string(model.params.decode))},
                 {"structure", std::string(to_string(model.params.structure))},
                 {"bw_max_iter", model.params.bw.max_iter},
                 {"bw_tol", model.params.bw.tol}};
  j["forest"] = nlohmann::ordered_json::parse(forest_to_json(model.forest));
  HmmModel hmm;
  hmm.trans = model.trans;
  hmm.discrete = model.emission;
  j["hmm"] = nlohmann::ordered_json::parse(hmm_to_json(hmm));
  nlohmann::ordered_json prov;
  prov["forest_ids"] = model.provenance.forest_ids;
  prov["hmm_ids"] = model.provenance.hmm_ids;
  prov["confusion"] = model.provenance.confusion;
  prov["warnings"] = model.provenance.warnings;
  j["provenance"] = std::move(prov);
  return j.dump(2) + "\n";
}

CombinedModel combined_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("combined model: invalid JSON: ") + e.what());
  }
  if (j.value("kind", "") != "combined") {
    throw DataError("combined model: missing kind 'combined'");
  }
  CombinedModel model;
  const auto& p = j.at("params");
  model.params.mode = feature_mode_from_string(p.at("mode").get<std::string>());
  model.params.window = p.at("window").get<std::size_t>();
  model.params.split_fraction = p.at("split_fraction").get<double>();
  model.params.split_seed = p.at("split_seed").get<std::uint64_t>();
  model.params.smoothing = p.at("smoothing").get<double>();
  model.params.decode = decode_mode_from_string(p.at("decode").get<std::string>());
  model.params.structure = structure_from_string(p.at("structure").get<std::string>());
  model.params.bw.max_iter = p.at("bw_max_iter").get<int>();
  model.params.bw.tol = p.at("bw_tol").get<double>();
  model.forest = forest_from_json(j.at("forest").dump());
  const auto hmm = hmm_from_json(j.at("hmm").dump());
  if (!hmm.discrete) throw DataError("combined model: expected a discrete emission table");
  model.trans = hmm.trans;
  model.emission = *hmm.discrete;
  const auto& prov = j.at("provenance");
  model.provenance.forest_ids = prov.at("forest_ids").get<std::vector<std::string>>();
  model.provenance.hmm_ids = prov.at("hmm_ids").get<std::vector<std::string>>();
  const auto conf = prov.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
  if (conf.size() != kNumPhases) throw DataError("combined model: bad confusion shape");
  for (std::size_t i = 0; i < kNumPhases; ++i) {
    if (conf[i].size() != kNumPhases) throw DataError("combined model: bad confusion shape");
    std::copy(conf[i].begin(), conf[i].end(), model.provenance.confusion[i].begin());
  }
  model.provenance.warnings = prov.at("warnings").get<std::vector<std::string>>();
  model.params.forest = model.forest.params;
  return model;
}

void save_combined(const CombinedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, combined_to_json(model));
}

CombinedModel load_combined(const std::filesystem::path& path) {
  return combined_from_json(read_file(path));
}

}  // namespace phasedet
