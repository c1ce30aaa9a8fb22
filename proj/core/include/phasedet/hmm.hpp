#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasedet/features.hpp"
#include "phasedet/phase.hpp"

namespace phasedet {

enum class TransitionStructure {
  kAdjacent,         // self loop and next state only
  kUpperTriangular,  // any forward jump (phases can be skipped)
};

TransitionStructure structure_from_string(std::string_view s);
std::string_view to_string(TransitionStructure s);

bool transition_allowed(TransitionStructure structure, int from, int to);

// Left-to-right transition model. The last state is absorbing by
// construction. State count is generic; the surgical pipeline uses 7.
struct TransitionModel {
  int n_states = kNumPhases;
  std::vector<double> pi;  // n_states
  std::vector<double> a;   // n_states x n_states, row-major
  TransitionStructure structure = TransitionStructure::kUpperTriangular;

  double at(int i, int j) const {
    return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_states) +
             static_cast<std::size_t>(j)];
  }
  double& at(int i, int j) {
    return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_states) +
             static_cast<std::size_t>(j)];
  }
};

// P(observed symbol | state), rows indexed by state.
struct DiscreteEmissionTable {
  int n_states = kNumPhases;
  int n_symbols = kNumPhases;
  std::vector<double> b;  // n_states x n_symbols, row-major

  double at(int s, int o) const {
    return b[static_cast<std::size_t>(s) * static_cast<std::size_t>(n_symbols) +
             static_cast<std::size_t>(o)];
  }
  double& at(int s, int o) {
    return b[static_cast<std::size_t>(s) * static_cast<std::size_t>(n_symbols) +
             static_cast<std::size_t>(o)];
  }
};

struct ChannelGaussian {
  double mean = 0.0;
  double stddev = 1.0;
};

// Naive per-state model over raw signals: Bernoulli for the 12 binary
// channels, Gaussian for the 4 analog channels and elapsed time.
struct StateSignalDistribution {
  std::array<double, kNumBinary> on_prob{};
  std::array<ChannelGaussian, kNumAnalog + 1> gaussians{};
};

struct SignalEmissionModel {
  std::array<StateSignalDistribution, kNumPhases> states{};
};

// Per-frame per-state log-likelihoods log P(obs_t | state). Entries may be
// -inf for observations a state cannot emit.
struct EmissionScores {
  std::size_t n_frames = 0;
  int n_states = kNumPhases;
  std::vector<double> log_lik;  // n_frames x n_states, row-major

  double at(std::size_t t, int s) const {
    return log_lik[t * static_cast<std::size_t>(n_states) + static_cast<std::size_t>(s)];
  }
};

struct ForwardResult {
  std::size_t n_frames = 0;
  int n_states = 0;
  std::vector<double> posteriors;  // filtered P(state_t | obs_1..t), row-major
  double log_likelihood = 0.0;

  double at(std::size_t t, int s) const {
    return posteriors[t * static_cast<std::size_t>(n_states) + static_cast<std::size_t>(s)];
  }
};

// Estimates transitions from labeled sequences: counts of consecutive pairs,
// one terminal self-loop per sequence (the final state is treated as
// absorbing), plus `smoothing` on every structurally allowed entry. Rows with
// no mass become uniform over allowed successors; disallowed entries stay 0.
TransitionModel init_transitions_from_labels(const std::vector<std::vector<int>>& label_sequences,
                                             TransitionStructure structure, double smoothing,
                                             int n_states = kNumPhases);

// Fits the naive Bernoulli/Gaussian signal model per phase from raw-mode
// feature matrices. Throws DataError when a phase is absent from the labels.
SignalEmissionModel fit_signal_emissions(const std::vector<FeatureMatrix>& features,
                                         const std::vector<std::vector<int>>& labels);

EmissionScores scores_from_signals(const SignalEmissionModel& model, const FeatureMatrix& raw);

// L[t][s] = log B[s][obs_t].
EmissionScores scores_from_discrete(const DiscreteEmissionTable& emission,
                                    std::span<const int> obs);

// Scaled forward recursion. Posteriors are renormalized every step; the log
// likelihood is the sum of the log scaling factors. Throws NumericError when
// the model assigns zero probability to an observed prefix.
ForwardResult forward_filter(const TransitionModel& trans, const EmissionScores& scores);

// Log-space Viterbi. Ties break toward the lower state index.
std::vector<int> viterbi_decode(const TransitionModel& trans, const EmissionScores& scores);

struct BaumWelchOptions {
  int max_iter = 100;
  double tol = 1e-6;
  bool update_emissions = false;
};

struct BaumWelchResult {
  TransitionModel trans;
  DiscreteEmissionTable emission;
  std::vector<double> likelihood_trace;  // one entry per E-step
};

// Multi-sequence EM re-estimation of the transition matrix (and optionally
// the emission table). Structural zeros of A are preserved exactly; the
// likelihood trace is non-decreasing.
BaumWelchResult baum_welch(const TransitionModel& trans, const DiscreteEmissionTable& emission,
                           const std::vector<std::vector<int>>& obs_sequences,
                           const BaumWelchOptions& opts = {});

// Persisted HMM: transitions plus exactly one emission family.
struct HmmModel {
  TransitionModel trans;
  std::optional<DiscreteEmissionTable> discrete;
  std::optional<SignalEmissionModel> signal;
};

std::string hmm_to_json(const HmmModel& model);
HmmModel hmm_from_json(const std::string& text);
void save_hmm(const HmmModel& model, const std::filesystem::path& path);
HmmModel load_hmm(const std::filesystem::path& path);

}  // namespace phasedet
