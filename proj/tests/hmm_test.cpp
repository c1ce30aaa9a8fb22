#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "phasedet/error.hpp"
#include "phasedet/hmm.hpp"
#include "phasedet/rng.hpp"
#include "test_util.hpp"

using namespace phasedet;
using namespace phasedet::testing;

namespace {

TransitionModel make_transitions(int n, const std::vector<double>& pi,
                                 const std::vector<std::vector<double>>& a,
                                 TransitionStructure structure) {
  TransitionModel t;
  t.n_states = n;
  t.pi = pi;
  t.structure = structure;
  t.a.clear();
  for (const auto& row : a) t.a.insert(t.a.end(), row.begin(), row.end());
  return t;
}

DiscreteEmissionTable make_emissions(int n_states, int n_symbols,
                                     const std::vector<std::vector<double>>& b) {
  DiscreteEmissionTable e;
  e.n_states = n_states;
  e.n_symbols = n_symbols;
  e.b.clear();
  for (const auto& row : b) e.b.insert(e.b.end(), row.begin(), row.end());
  return e;
}

// pi=[1,0], A=[[0.5,0.5],[0,1]], B=[[0.9,0.1],[0.2,0.8]] from the worked
// example: with obs [0,1] the two feasible paths carry 0.045 and 0.36.
struct TwoStateExample {
  TransitionModel trans = make_transitions(2, {1.0, 0.0}, {{0.5, 0.5}, {0.0, 1.0}},
                                           TransitionStructure::kUpperTriangular);
  DiscreteEmissionTable emission = make_emissions(2, 2, {{0.9, 0.1}, {0.2, 0.8}});
  std::vector<int> obs = {0, 1};
};

// Random feasible left-to-right model: diagonal always allowed, random
// forward jumps per structure, strictly positive pi and B.
struct RandomModel {
  TransitionModel trans;
  DiscreteEmissionTable emission;
};

RandomModel random_model(Rng& rng, int n_states, int n_symbols, bool random_structure) {
  RandomModel m;
  m.trans.n_states = n_states;
  m.trans.structure = TransitionStructure::kUpperTriangular;
  m.trans.pi.assign(static_cast<std::size_t>(n_states), 0.0);
  double pi_sum = 0.0;
  for (auto& p : m.trans.pi) {
    p = 0.05 + rng.next_double();
    pi_sum += p;
  }
  for (auto& p : m.trans.pi) p /= pi_sum;

  m.trans.a.assign(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_states), 0.0);
  for (int i = 0; i < n_states; ++i) {
    std::vector<int> allowed;
    for (int j = i; j < n_states; ++j) {
      if (j == i || !random_structure || rng.bernoulli(0.6)) allowed.push_back(j);
    }
    double row_sum = 0.0;
    std::vector<double> weights(allowed.size());
    for (auto& w : weights) {
      w = 0.05 + rng.next_double();
      row_sum += w;
    }
    for (std::size_t k = 0; k < allowed.size(); ++k) {
      m.trans.at(i, allowed[k]) = weights[k] / row_sum;
    }
  }

  m.emission.n_states = n_states;
  m.emission.n_symbols = n_symbols;
  m.emission.b.assign(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_symbols),
                      0.0);
  for (int s = 0; s < n_states; ++s) {
    double row_sum = 0.0;
    for (int o = 0; o < n_symbols; ++o) {
      m.emission.at(s, o) = 0.05 + rng.next_double();
      row_sum += m.emission.at(s, o);
    }
    for (int o = 0; o < n_symbols; ++o) m.emission.at(s, o) /= row_sum;
  }
  return m;
}

}  // namespace

TEST_CASE("init_transitions_from_labels counts pairs with a terminal self-loop") {
  const std::vector<std::vector<int>> seqs = {{0, 0, 0, 1, 1, 2}};
  const auto t =
      init_transitions_from_labels(seqs, TransitionStructure::kUpperTriangular, 0.0);
  CHECK(t.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(t.at(0, 2) == 0.0);
  CHECK(t.at(1, 0) == 0.0);
  CHECK(t.at(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.at(1, 2) == doctest::Approx(0.5).epsilon(1e-12));
  // final observed state becomes a self-loop
  CHECK(t.at(2, 2) == 1.0);
  // unvisited rows: uniform over allowed successors
  CHECK(t.at(3, 3) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(t.at(3, 6) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(t.at(6, 6) == 1.0);
  CHECK(t.pi[0] == 1.0);
}

TEST_CASE("init_transitions handles a single-state sequence") {
  const std::vector<std::vector<int>> seqs = {{0, 0, 0, 0}};
  const auto t = init_transitions_from_labels(seqs, TransitionStructure::kUpperTriangular, 0.0);
  CHECK(t.at(0, 0) == 1.0);
  for (int j = 1; j < kNumPhases; ++j) CHECK(t.at(0, j) == 0.0);
  // every other row is uniform over its allowed successors
  CHECK(t.at(1, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("init_transitions row sums and structural zeros") {
  Rng rng(404);
  std::vector<std::vector<int>> seqs;
  for (int s = 0; s < 5; ++s) {
    std::vector<int> seq;
    int phase = 0;
    while (phase < kNumPhases) {
      for (int k = rng.uniform_int(1, 8); k > 0; --k) seq.push_back(phase);
      phase += rng.uniform_int(1, 2);
    }
    seqs.push_back(std::move(seq));
  }
  for (const auto structure :
       {TransitionStructure::kUpperTriangular, TransitionStructure::kAdjacent}) {
    const auto t = init_transitions_from_labels(seqs, structure, 1e-4);
    for (int i = 0; i < kNumPhases; ++i) {
      double row = 0.0;
      for (int j = 0; j < kNumPhases; ++j) {
        if (!transition_allowed(structure, i, j)) CHECK(t.at(i, j) == 0.0);
        row += t.at(i, j);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(t.at(6, 6) == 1.0);
  }
}

TEST_CASE("init_transitions rejects bad input") {
  CHECK_THROWS_AS(init_transitions_from_labels({{0, 1, 0}},
                                               TransitionStructure::kUpperTriangular, 0.0),
                  DataError);
  CHECK_THROWS_AS(init_transitions_from_labels({{0, 1}},
                                               TransitionStructure::kUpperTriangular, -0.1),
                  DataError);
}

TEST_CASE("fit_signal_emissions clamps and floors") {
  // Two recordings covering all 7 phases; phase 0 has binary channel 0 always
  // on and a constant analog channel.
  std::vector<FeatureMatrix> features;
  std::vector<std::vector<int>> labels;
  Rng rng(8);
  FeatureMatrix m;
  m.mode = FeatureMode::kRaw;
  m.n_cols = 17;
  std::vector<int> lab;
  for (int phase = 0; phase < kNumPhases; ++phase) {
    for (int k = 0; k < 20; ++k) {
      std::vector<double> row(17, 0.0);
      row[0] = phase == 0 ? 1.0 : (rng.bernoulli(0.5) ? 1.0 : 0.0);
      row[12] = phase == 0 ? 42.0 : rng.normal(phase * 10.0, 1.0);
      row[13] = rng.normal(0.0, 2.0);
      row[16] = static_cast<double>(lab.size());
      m.values.insert(m.values.end(), row.begin(), row.end());
      lab.push_back(phase);
    }
  }
  m.n_rows = lab.size();
  for (std::size_t c = 0; c < 17; ++c) m.names.push_back("f");
  features.push_back(m);
  labels.push_back(lab);

  const auto model = fit_signal_emissions(features, labels);
  CHECK(model.states[0].on_prob[0] == 1.0 - 1e-4);
  CHECK(model.states[0].gaussians[0].mean == 42.0);
  CHECK(model.states[0].gaussians[0].stddev == 1e-3);
}

TEST_CASE("fit_signal_emissions requires every phase") {
  std::vector<FeatureMatrix> features;
  std::vector<std::vector<int>> labels;
  FeatureMatrix m;
  m.mode = FeatureMode::kRaw;
  m.n_cols = 17;
  m.n_rows = 2;
  m.values.assign(34, 0.0);
  for (std::size_t c = 0; c < 17; ++c) m.names.push_back("f");
  features.push_back(m);
  labels.push_back({0, 1});  // phases 2..6 missing
  CHECK_THROWS_WITH_AS(fit_signal_emissions(features, labels), doctest::Contains("absent"),
                       DataError);
}

TEST_CASE("signal emissions prefer their own state on separable data") {
  // Two phases with analog channel means far apart.
  std::vector<FeatureMatrix> features;
  std::vector<std::vector<int>> labels;
  Rng rng(9);
  FeatureMatrix m;
  m.mode = FeatureMode::kRaw;
  m.n_cols = 17;
  std::vector<int> lab;
  for (int phase = 0; phase < kNumPhases; ++phase) {
    for (int k = 0; k < 50; ++k) {
      std::vector<double> row(17, 0.0);
      row[12] = rng.normal(phase < 2 ? phase * 100.0 : 500.0 + phase, 1.0);
      row[16] = static_cast<double>(lab.size());
      m.values.insert(m.values.end(), row.begin(), row.end());
      lab.push_back(phase);
    }
  }
  m.n_rows = lab.size();
  for (std::size_t c = 0; c < 17; ++c) m.names.push_back("f");
  features.push_back(m);
  labels.push_back(lab);

  const auto model = fit_signal_emissions(features, labels);
  const auto scores = scores_from_signals(model, features[0]);
  // Frames of phase 0 score higher under state 0 than state 1 and vice versa.
  for (std::size_t t = 0; t < 50; ++t) CHECK(scores.at(t, 0) > scores.at(t, 1));
  for (std::size_t t = 50; t < 100; ++t) CHECK(scores.at(t, 1) > scores.at(t, 0));
}

TEST_CASE("scores_from_discrete is a log table lookup") {
  const auto emission = make_emissions(2, 2, {{0.8, 0.2}, {0.3, 0.7}});
  const std::vector<int> obs = {1, 0};
  const auto scores = scores_from_discrete(emission, obs);
  CHECK(scores.at(0, 0) == std::log(0.2));
  CHECK(scores.at(0, 1) == std::log(0.7));
  CHECK(scores.at(1, 0) == std::log(0.8));
  CHECK_THROWS_AS(scores_from_discrete(emission, std::vector<int>{2}), DataError);
}

TEST_CASE("forward_filter two-state worked example") {
  TwoStateExample ex;
  const auto scores = scores_from_discrete(ex.emission, ex.obs);
  const auto result = forward_filter(ex.trans, scores);
  REQUIRE(result.n_frames == 2);
  CHECK(result.at(1, 0) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(result.at(1, 1) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(result.log_likelihood == doctest::Approx(std::log(0.405)).epsilon(1e-12));
}

TEST_CASE("forward_filter on a deterministic chain") {
  const auto trans = make_transitions(2, {1.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}},
                                      TransitionStructure::kUpperTriangular);
  const auto emission = make_emissions(2, 2, {{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<int> obs(6, 0);
  const auto result = forward_filter(trans, scores_from_discrete(emission, obs));
  CHECK(result.log_likelihood == 0.0);
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(result.at(t, 0) == 1.0);
    CHECK(result.at(t, 1) == 0.0);
  }
}

TEST_CASE("forward_filter reports impossible observations") {
  const auto trans = make_transitions(2, {1.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}},
                                      TransitionStructure::kUpperTriangular);
  const auto emission = make_emissions(2, 2, {{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<int> obs = {0, 1, 0};  // symbol 1 unreachable from state 0
  CHECK_THROWS_WITH_AS(forward_filter(trans, scores_from_discrete(emission, obs)),
                       doctest::Contains("impossible observation at t=1"), NumericError);
}

TEST_CASE("forward_filter matches exhaustive enumeration") {
  Rng rng(1001);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_index(3));  // 2..4 states
    const int m = 2 + static_cast<int>(rng.uniform_index(3));
    const auto model = random_model(rng, n, m, true);
    const std::size_t frames = 1 + rng.uniform_index(8);
    std::vector<int> obs(frames);
    for (auto& o : obs) o = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(m)));

    const auto scores = scores_from_discrete(model.emission, obs);
    const auto got = forward_filter(model.trans, scores);
    const auto want = oracle_enumerate_forward(model.trans, model.emission, obs);

    REQUIRE(std::abs(got.log_likelihood - want.log_likelihood) < 1e-10);
    for (std::size_t t = 0; t < frames; ++t) {
      double row_sum = 0.0;
      for (int s = 0; s < n; ++s) {
        REQUIRE(std::abs(got.at(t, s) - want.filtered[t][static_cast<std::size_t>(s)]) < 1e-10);
        row_sum += got.at(t, s);
      }
      REQUIRE(std::abs(row_sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("forward_filter is stable over very long sequences") {
  const auto trans = make_transitions(2, {1.0, 0.0}, {{0.999, 0.001}, {0.0, 1.0}},
                                      TransitionStructure::kUpperTriangular);
  const auto emission = make_emissions(2, 2, {{0.7, 0.3}, {0.4, 0.6}});
  Rng rng(5);
  std::vector<int> obs(100000);
  for (auto& o : obs) o = rng.bernoulli(0.5) ? 1 : 0;
  const auto result = forward_filter(trans, scores_from_discrete(emission, obs));
  CHECK(std::isfinite(result.log_likelihood));
  for (std::size_t t = 0; t < obs.size(); t += 9973) {
    double row = result.at(t, 0) + result.at(t, 1);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("viterbi_decode two-state worked example") {
  TwoStateExample ex;
  const auto path = viterbi_decode(ex.trans, scores_from_discrete(ex.emission, ex.obs));
  CHECK(path == std::vector<int>{0, 1});  // 0.36 beats 0.045
}

TEST_CASE("viterbi_decode length-1 sequence") {
  TwoStateExample ex;
  const std::vector<int> zero = {0};
  const std::vector<int> one = {1};
  const auto path = viterbi_decode(ex.trans, scores_from_discrete(ex.emission, zero));
  CHECK(path == std::vector<int>{0});
  const auto path2 = viterbi_decode(ex.trans, scores_from_discrete(ex.emission, one));
  // pi puts all mass on state 0, so even symbol 1 decodes to state 0
  CHECK(path2 == std::vector<int>{0});
}

TEST_CASE("viterbi_decode matches exhaustive enumeration") {
  Rng rng(2002);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_index(3));
    const int m = 2 + static_cast<int>(rng.uniform_index(3));
    const auto model = random_model(rng, n, m, true);
    const std::size_t frames = 1 + rng.uniform_index(8);
    std::vector<int> obs(frames);
    for (auto& o : obs) o = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(m)));

    const auto got = viterbi_decode(model.trans, scores_from_discrete(model.emission, obs));
    const auto want = oracle_enumerate_viterbi(model.trans, model.emission, obs);
    REQUIRE(got == want);
  }
}

TEST_CASE("viterbi_decode output is monotone under left-to-right structure") {
  Rng rng(3003);
  for (int rep = 0; rep < 30; ++rep) {
    const auto model = random_model(rng, kNumPhases, kNumPhases, true);
    std::vector<int> obs(100);
    for (auto& o : obs) o = static_cast<int>(rng.uniform_index(kNumPhases));
    const auto path = viterbi_decode(model.trans, scores_from_discrete(model.emission, obs));
    for (std::size_t t = 1; t < path.size(); ++t) REQUIRE(path[t] >= path[t - 1]);
  }
}

TEST_CASE("baum_welch is a fixed point on deterministic data") {
  const auto trans = make_transitions(2, {1.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}},
                                      TransitionStructure::kUpperTriangular);
  const auto emission = make_emissions(2, 2, {{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<std::vector<int>> obs = {{0, 0, 0, 0}};
  const auto result = baum_welch(trans, emission, obs, {.max_iter = 5, .tol = 1e-9});
  REQUIRE(result.likelihood_trace.size() >= 2);
  CHECK(result.likelihood_trace[1] ==
        doctest::Approx(result.likelihood_trace[0]).epsilon(1e-12));
  CHECK(result.trans.at(0, 0) == 1.0);
  CHECK(result.trans.at(0, 1) == 0.0);
}

TEST_CASE("baum_welch preserves structural zeros and improves likelihood") {
  Rng rng(4004);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(rng.uniform_index(5));  // 3..7
    const auto model = random_model(rng, n, n, true);
    std::vector<std::vector<int>> seqs(5);
    for (auto& seq : seqs) {
      seq.resize(1 + rng.uniform_index(50));
      for (auto& o : seq) o = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n)));
    }
    const auto result = baum_welch(model.trans, model.emission, seqs, {.max_iter = 30, .tol = 0.0});

    for (std::size_t k = 1; k < result.likelihood_trace.size(); ++k) {
      REQUIRE(result.likelihood_trace[k] >= result.likelihood_trace[k - 1] - 1e-9);
    }
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) {
        if (model.trans.at(i, j) == 0.0) REQUIRE(result.trans.at(i, j) == 0.0);
        row += result.trans.at(i, j);
      }
      REQUIRE(row == doctest::Approx(1.0).epsilon(1e-9));
    }
    // emissions stay fixed by default
    REQUIRE(result.emission.b == model.emission.b);
  }
}

TEST_CASE("baum_welch trace matches forward_filter recomputation per iteration") {
  Rng rng(5005);
  const auto model = random_model(rng, 3, 3, false);
  std::vector<std::vector<int>> seqs(5);
  for (auto& seq : seqs) {
    seq.resize(20);
    for (auto& o : seq) o = static_cast<int>(rng.uniform_index(3));
  }

  auto forward_total = [&](const TransitionModel& t) {
    double total = 0.0;
    for (const auto& seq : seqs) {
      total += forward_filter(t, scores_from_discrete(model.emission, seq)).log_likelihood;
    }
    return total;
  };

  const auto full = baum_welch(model.trans, model.emission, seqs, {.max_iter = 6, .tol = 0.0});
  REQUIRE(full.likelihood_trace.size() == 7);
  CHECK(full.likelihood_trace[0] ==
        doctest::Approx(forward_total(model.trans)).epsilon(1e-9));
  for (int k = 1; k <= 6; ++k) {
    const auto partial =
        baum_welch(model.trans, model.emission, seqs, {.max_iter = k, .tol = 0.0});
    CHECK(full.likelihood_trace[static_cast<std::size_t>(k)] ==
          doctest::Approx(forward_total(partial.trans)).epsilon(1e-9));
  }
}

TEST_CASE("baum_welch can update emissions when asked") {
  Rng rng(6006);
  const auto model = random_model(rng, 3, 3, false);
  std::vector<std::vector<int>> seqs = {{0, 0, 1, 1, 2, 2}, {0, 1, 1, 2, 2, 2}};
  const auto result = baum_welch(model.trans, model.emission, seqs,
                                 {.max_iter = 10, .tol = 0.0, .update_emissions = true});
  CHECK(result.emission.b != model.emission.b);
  for (int s = 0; s < 3; ++s) {
    double row = 0.0;
    for (int o = 0; o < 3; ++o) row += result.emission.at(s, o);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("hmm JSON round trip for both emission families") {
  TempDir dir;
  Rng rng(7007);
  const auto model = random_model(rng, kNumPhases, kNumPhases, true);

  HmmModel discrete;
  discrete.trans = model.trans;
  discrete.discrete = model.emission;
  const auto p1 = dir.path() / "hmm_discrete.json";
  save_hmm(discrete, p1);
  const auto loaded1 = load_hmm(p1);
  REQUIRE(loaded1.discrete.has_value());
  CHECK(loaded1.trans.a == discrete.trans.a);
  CHECK(loaded1.trans.pi == discrete.trans.pi);
  CHECK(loaded1.discrete->b == discrete.discrete->b);
  CHECK(hmm_to_json(loaded1) == hmm_to_json(discrete));

  HmmModel signal;
  signal.trans = model.trans;
  SignalEmissionModel sig;
  for (auto& st : sig.states) {
    for (auto& p : st.on_prob) p = rng.next_double();
    for (auto& g : st.gaussians) g = {rng.normal(0, 10), 0.5 + rng.next_double()};
  }
  signal.signal = sig;
  const auto p2 = dir.path() / "hmm_signal.json";
  save_hmm(signal, p2);
  const auto loaded2 = load_hmm(p2);
  REQUIRE(loaded2.signal.has_value());
  CHECK(hmm_to_json(loaded2) == hmm_to_json(signal));
}
