#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "phasedet/combined.hpp"
#include "phasedet/error.hpp"
#include "phasedet/synth.hpp"
#include "test_util.hpp"

using namespace phasedet;
using namespace phasedet::testing;

namespace {

CombinedParams fast_params(std::uint64_t seed) {
  CombinedParams params;
  params.forest.n_trees = 12;
  params.forest.seed = seed;
  params.split_seed = seed + 1;
  params.window = 21;
  return params;
}

SynthConfig small_clean_config() {
  auto config = SynthConfig::clean_default();
  for (auto& phase : config.phases) {
    phase.duration_min = 25;
    phase.duration_max = 25;
  }
  return config;
}

}  // namespace

TEST_CASE("split_training_surgeries sizes and determinism") {
  const auto s18 = split_training_surgeries(18, 0.5, 7);
  CHECK(s18.part1.size() == 9);
  CHECK(s18.part2.size() == 9);

  const auto s2 = split_training_surgeries(2, 0.9, 3);
  CHECK(s2.part1.size() == 1);
  CHECK(s2.part2.size() == 1);

  const auto a = split_training_surgeries(3, 0.5, 42);
  const auto b = split_training_surgeries(3, 0.5, 42);
  CHECK(a.part1 == b.part1);
  CHECK(a.part2 == b.part2);

  // parts form a disjoint cover
  std::set<std::size_t> seen(a.part1.begin(), a.part1.end());
  for (const auto i : a.part2) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 3);

  CHECK_THROWS_AS(split_training_surgeries(1, 0.5, 0), DataError);
  CHECK_THROWS_AS(split_training_surgeries(4, 0.0, 0), DataError);
}

TEST_CASE("confusion_matrix worked examples") {
  const std::vector<int> truth = {0, 0, 1};
  const auto diag = confusion_matrix(truth, truth);
  CHECK(diag[0][0] == 2);
  CHECK(diag[1][1] == 1);

  const auto off = confusion_matrix(std::vector<int>{0, 0}, std::vector<int>{1, 1});
  CHECK(off[0][1] == 2);
  std::int64_t total = 0;
  for (const auto& row : off) {
    for (const auto v : row) total += v;
  }
  CHECK(total == 2);

  CHECK_THROWS_AS(confusion_matrix(std::vector<int>{0}, std::vector<int>{0, 1}), DataError);
}

TEST_CASE("confusion_matrix total always equals sequence length") {
  Rng rng(55);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(200);
    std::vector<int> truth(n), pred(n);
    for (std::size_t t = 0; t < n; ++t) {
      truth[t] = static_cast<int>(rng.uniform_index(kNumPhases));
      pred[t] = static_cast<int>(rng.uniform_index(kNumPhases));
    }
    const auto counts = confusion_matrix(truth, pred);
    std::int64_t total = 0;
    for (const auto& row : counts) {
      for (const auto v : row) total += v;
    }
    REQUIRE(total == static_cast<std::int64_t>(n));
  }
}

TEST_CASE("emission_from_confusion normalizes rows") {
  Confusion counts{};
  counts[0] = {8, 2, 0, 0, 0, 0, 0};
  counts[1] = {1, 9, 0, 0, 0, 0, 0};
  const auto table = emission_from_confusion(counts, 0.0);
  CHECK(table.at(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(table.at(0, 1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(table.at(1, 0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(table.at(1, 1) == doctest::Approx(0.9).epsilon(1e-12));
  // rows without any counts become uniform
  for (int o = 0; o < kNumPhases; ++o) {
    CHECK(table.at(3, o) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  }
}

TEST_CASE("emission_from_confusion with smoothing is strictly positive") {
  Rng rng(66);
  Confusion counts{};
  for (auto& row : counts) {
    for (auto& v : row) v = static_cast<std::int64_t>(rng.uniform_index(50));
  }
  counts[4] = {0, 0, 0, 0, 0, 0, 0};  // degenerate row
  const auto table = emission_from_confusion(counts, 1e-6);
  for (int s = 0; s < kNumPhases; ++s) {
    double row = 0.0;
    for (int o = 0; o < kNumPhases; ++o) {
      CHECK(table.at(s, o) > 0.0);
      row += table.at(s, o);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(table.at(4, 0) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK_THROWS_AS(emission_from_confusion(counts, -1.0), DataError);
}

TEST_CASE("train_combined on separable data gives a near-diagonal emission") {
  const auto config = small_clean_config();
  const auto surgeries = generate_dataset(config, 4, 1234);
  const auto model = train_combined(surgeries, fast_params(9));

  for (int s = 0; s < kNumPhases; ++s) {
    CHECK(model.emission.at(s, s) > 0.99);
  }
  // split provenance is a disjoint cover of the inputs
  std::set<std::string> ids;
  for (const auto& id : model.provenance.forest_ids) CHECK(ids.insert(id).second);
  for (const auto& id : model.provenance.hmm_ids) CHECK(ids.insert(id).second);
  CHECK(ids.size() == 4);
}

TEST_CASE("train_combined is deterministic end to end") {
  const auto config = small_clean_config();
  const auto surgeries = generate_dataset(config, 4, 99);
  const auto a = train_combined(surgeries, fast_params(3));
  const auto b = train_combined(surgeries, fast_params(3));
  CHECK(combined_to_json(a) == combined_to_json(b));
  const auto c = train_combined(surgeries, fast_params(3), 2);
  CHECK(combined_to_json(a) == combined_to_json(c));
}

TEST_CASE("provenance confusion matrix is recomputable from part2 predictions") {
  auto config = SynthConfig::noisy_default();
  for (auto& phase : config.phases) {
    phase.duration_min = 20;
    phase.duration_max = 60;
  }
  config.clipping_skip_prob = 0.0;
  const auto surgeries = generate_dataset(config, 5, 505);
  const auto model = train_combined(surgeries, fast_params(11));

  Confusion recomputed{};
  for (const auto& rec : surgeries) {
    if (std::find(model.provenance.hmm_ids.begin(), model.provenance.hmm_ids.end(), rec.id) ==
        model.provenance.hmm_ids.end()) {
      continue;
    }
    accumulate_confusion(recomputed, rec.labels, rf_symbols(model, rec));
  }
  CHECK(recomputed == model.provenance.confusion);
}

TEST_CASE("train_combined warns when a phase is missing from the calibration split") {
  auto config = small_clean_config();
  config.clipping_skip_prob = 0.999;  // Clipping virtually always skipped
  const auto surgeries = generate_dataset(config, 4, 17);
  const auto model = train_combined(surgeries, fast_params(5));
  REQUIRE_FALSE(model.provenance.warnings.empty());
  CHECK(model.provenance.warnings[0].find("Clipping") != std::string::npos);
}

TEST_CASE("predict_phases rf method equals direct forest prediction") {
  const auto config = small_clean_config();
  const auto surgeries = generate_dataset(config, 4, 321);
  const auto model = train_combined(surgeries, fast_params(21));
  const auto probe = generate_surgery(config, 777, "probe");

  const auto rf_out = predict_phases(model, probe, PredictMethod::kRf);
  const auto features = build_features(probe, model.params.mode, model.params.window);
  REQUIRE(rf_out.size() == features.n_rows);
  for (std::size_t t = 0; t < features.n_rows; ++t) {
    REQUIRE(rf_out[t] == forest_predict(model.forest, features.row(t)));
  }
}

TEST_CASE("viterbi smoothing removes an isolated forward excursion") {
  // RF symbols [0,0,0,3,0,0,1,1]: a monotone path cannot visit 3 and return,
  // so the excursion is absorbed and the tail switches to 1.
  TransitionModel trans;
  trans.n_states = kNumPhases;
  trans.structure = TransitionStructure::kUpperTriangular;
  trans.pi.assign(kNumPhases, 0.0);
  trans.pi[0] = 1.0;
  trans.a.assign(kNumPhases * kNumPhases, 0.0);
  for (int i = 0; i < kNumPhases; ++i) {
    if (i == kNumPhases - 1) {
      trans.at(i, i) = 1.0;
      continue;
    }
    trans.at(i, i) = 0.9;
    const double forward = 0.1 / static_cast<double>(kNumPhases - 1 - i);
    for (int j = i + 1; j < kNumPhases; ++j) trans.at(i, j) = forward;
  }

  Confusion diag{};
  for (int s = 0; s < kNumPhases; ++s) {
    diag[static_cast<std::size_t>(s)][static_cast<std::size_t>(s)] = 100;
  }
  const auto emission = emission_from_confusion(diag, 1e-2);

  const std::vector<int> symbols = {0, 0, 0, 3, 0, 0, 1, 1};
  const auto path = viterbi_decode(trans, scores_from_discrete(emission, symbols));
  const std::vector<int> expected = {0, 0, 0, 0, 0, 0, 1, 1};
  CHECK(path == expected);
  // cross-check against exhaustive enumeration
  CHECK(oracle_enumerate_viterbi(trans, emission, symbols) == expected);
}

TEST_CASE("combined predictions are monotone and never hit impossible observations") {
  auto config = SynthConfig::noisy_default();
  for (auto& phase : config.phases) {
    phase.duration_min = 15;
    phase.duration_max = 50;
  }
  const auto surgeries = generate_dataset(config, 5, 31);
  const auto model = train_combined(surgeries, fast_params(77));

  for (int probe_seed = 0; probe_seed < 5; ++probe_seed) {
    const auto probe =
        generate_surgery(config, static_cast<std::uint64_t>(probe_seed) + 1000, "probe");
    const auto viterbi = predict_phases(model, probe, PredictMethod::kHmmViterbi);
    for (std::size_t t = 1; t < viterbi.size(); ++t) REQUIRE(viterbi[t] >= viterbi[t - 1]);
    const auto filtering = predict_phases(model, probe, PredictMethod::kHmmFiltering);
    REQUIRE(filtering.size() == probe.size());
  }
}

TEST_CASE("combined model JSON round trip restores predictions bit-exactly") {
  TempDir dir;
  const auto config = small_clean_config();
  const auto surgeries = generate_dataset(config, 4, 808);
  const auto model = train_combined(surgeries, fast_params(13));

  const auto path = dir.path() / "combined.json";
  save_combined(model, path);
  const auto loaded = load_combined(path);
  CHECK(combined_to_json(model) == combined_to_json(loaded));

  const auto probe = generate_surgery(config, 4321, "probe");
  for (const auto method :
       {PredictMethod::kRf, PredictMethod::kHmmFiltering, PredictMethod::kHmmViterbi}) {
    REQUIRE(predict_phases(model, probe, method) == predict_phases(loaded, probe, method));
  }
}

TEST_CASE("train_combined input validation") {
  const auto config = small_clean_config();
  auto surgeries = generate_dataset(config, 1, 5);
  CHECK_THROWS_AS(train_combined(surgeries, fast_params(1)), DataError);

  surgeries = generate_dataset(config, 2, 5);
  surgeries[0].labels.clear();
  CHECK_THROWS_WITH_AS(train_combined(surgeries, fast_params(1)),
                       doctest::Contains("unlabeled"), DataError);
}
