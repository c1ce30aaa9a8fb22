#include "phasedet/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "phasedet/error.hpp"
#include "phasedet/io.hpp"

namespace phasedet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kBernoulliClamp = 1e-4;
constexpr double kStddevFloor = 1e-3;

double log_normal_pdf(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(stddev) - 0.5 * z * z;
}

void check_scores(const TransitionModel& trans, const EmissionScores& scores) {
  if (scores.n_frames == 0) throw DataError("emission scores: empty sequence");
  if (scores.n_states != trans.n_states) {
    throw DataError("emission scores: state count does not match transition model");
  }
}

}  // namespace

TransitionStructure structure_from_string(std::string_view s) {
  if (s == "adjacent") return TransitionStructure::kAdjacent;
  if (s == "upper_triangular") return TransitionStructure::kUpperTriangular;
  throw DataError("unknown transition structure: " + std::string(s));
}

std::string_view to_string(TransitionStructure s) {
  switch (s) {
    case TransitionStructure::kAdjacent: return "adjacent";
    case TransitionStructure::kUpperTriangular: return "upper_triangular";
  }
  throw DataError("invalid transition structure");
}

bool transition_allowed(TransitionStructure structure, int from, int to) {
  if (to < from) return false;
  if (structure == TransitionStructure::kAdjacent && to > from + 1) return false;
  return true;
}

TransitionModel init_transitions_from_labels(const std::vector<std::vector<int>>& label_sequences,
                                             TransitionStructure structure, double smoothing,
                                             int n_states) {
  if (smoothing < 0.0) throw DataError("init_transitions: negative smoothing");
  if (n_states < 1) throw DataError("init_transitions: n_states must be >= 1");
  if (label_sequences.empty()) throw DataError("init_transitions: no label sequences");

  const std::size_t n = static_cast<std::size_t>(n_states);
  std::vector<double> counts(n * n, 0.0);
  for (const auto& seq : label_sequences) {
    if (seq.empty()) throw DataError("init_transitions: empty label sequence");
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (seq[t] < 0 || seq[t] >= n_states) {
        throw DataError("init_transitions: label out of range");
      }
      if (t > 0 && seq[t] < seq[t - 1]) {
        throw DataError("init_transitions: non-monotone sequence at t=" + std::to_string(t));
      }
    }
    for (std::size_t t = 1; t < seq.size(); ++t) {
      counts[static_cast<std::size_t>(seq[t - 1]) * n + static_cast<std::size_t>(seq[t])] += 1.0;
    }
    // The last observed state is treated as absorbing.
    counts[static_cast<std::size_t>(seq.back()) * n + static_cast<std::size_t>(seq.back())] += 1.0;
  }

  TransitionModel model;
  model.n_states = n_states;
  model.structure = structure;
  model.pi.assign(n, 0.0);
  model.pi[0] = 1.0;
  model.a.assign(n * n, 0.0);

  for (int i = 0; i < n_states; ++i) {
    double row_sum = 0.0;
    int n_allowed = 0;
    for (int j = 0; j < n_states; ++j) {
      if (!transition_allowed(structure, i, j)) continue;
      ++n_allowed;
      row_sum += counts[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] + smoothing;
    }
    if (row_sum == 0.0) {
      for (int j = 0; j < n_states; ++j) {
        if (transition_allowed(structure, i, j)) {
          model.at(i, j) = 1.0 / static_cast<double>(n_allowed);
        }
      }
    } else {
      for (int j = 0; j < n_states; ++j) {
        if (transition_allowed(structure, i, j)) {
          model.at(i, j) =
              (counts[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] + smoothing) /
              row_sum;
        }
      }
    }
  }
  return model;
}

SignalEmissionModel fit_signal_emissions(const std::vector<FeatureMatrix>& features,
                                         const std::vector<std::vector<int>>& labels) {
  if (features.size() != labels.size() || features.empty()) {
    throw DataError("fit_signal_emissions: need matching feature and label sequences");
  }
  const std::size_t raw_cols = static_cast<std::size_t>(feature_count(FeatureMode::kRaw));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].mode != FeatureMode::kRaw || features[i].n_cols != raw_cols) {
      throw DataError("fit_signal_emissions: features must be raw mode");
    }
    if (features[i].n_rows != labels[i].size()) {
      throw DataError("fit_signal_emissions: label count does not match frames");
    }
  }

  // Accumulate per-phase sums.
  std::array<std::int64_t, kNumPhases> n_frames{};
  std::array<std::array<double, kNumBinary>, kNumPhases> on_counts{};
  std::array<std::array<double, kNumAnalog + 1>, kNumPhases> sum{};
  std::array<std::array<double, kNumAnalog + 1>, kNumPhases> sum_sq{};

  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureMatrix& m = features[i];
    for (std::size_t t = 0; t < m.n_rows; ++t) {
      const int s = labels[i][t];
      if (!is_valid_phase(s)) throw DataError("fit_signal_emissions: label out of range");
      const auto su = static_cast<std::size_t>(s);
      ++n_frames[su];
      for (int b = 0; b < kNumBinary; ++b) {
        on_counts[su][static_cast<std::size_t>(b)] += m.at(t, static_cast<std::size_t>(b));
      }
      for (int g = 0; g < kNumAnalog + 1; ++g) {
        const double x = m.at(t, static_cast<std::size_t>(kNumBinary + g));
        sum[su][static_cast<std::size_t>(g)] += x;
        sum_sq[su][static_cast<std::size_t>(g)] += x * x;
      }
    }
  }

  SignalEmissionModel model;
  for (int s = 0; s < kNumPhases; ++s) {
    const auto su = static_cast<std::size_t>(s);
    if (n_frames[su] == 0) {
      throw DataError("fit_signal_emissions: phase '" + std::string(phase_name(s)) +
                      "' absent from training data");
    }
    const double n = static_cast<double>(n_frames[su]);
    for (int b = 0; b < kNumBinary; ++b) {
      const double p = on_counts[su][static_cast<std::size_t>(b)] / n;
      model.states[su].on_prob[static_cast<std::size_t>(b)] =
          std::clamp(p, kBernoulliClamp, 1.0 - kBernoulliClamp);
    }
    for (int g = 0; g < kNumAnalog + 1; ++g) {
      const auto gu = static_cast<std::size_t>(g);
      const double mean = sum[su][gu] / n;
      const double var = std::max(0.0, sum_sq[su][gu] / n - mean * mean);
      model.states[su].gaussians[gu] = {mean, std::max(std::sqrt(var), kStddevFloor)};
    }
  }
  return model;
}

EmissionScores scores_from_signals(const SignalEmissionModel& model, const FeatureMatrix& raw) {
  if (raw.mode != FeatureMode::kRaw ||
      raw.n_cols != static_cast<std::size_t>(feature_count(FeatureMode::kRaw))) {
    throw DataError("scores_from_signals: features must be raw mode");
  }
  EmissionScores scores;
  scores.n_frames = raw.n_rows;
  scores.n_states = kNumPhases;
  scores.log_lik.assign(raw.n_rows * kNumPhases, 0.0);
  for (std::size_t t = 0; t < raw.n_rows; ++t) {
    for (int s = 0; s < kNumPhases; ++s) {
      const auto& dist = model.states[static_cast<std::size_t>(s)];
      double ll = 0.0;
      for (int b = 0; b < kNumBinary; ++b) {
        const bool on = raw.at(t, static_cast<std::size_t>(b)) > 0.5;
        const double p = dist.on_prob[static_cast<std::size_t>(b)];
        ll += std::log(on ? p : 1.0 - p);
      }
      for (int g = 0; g < kNumAnalog + 1; ++g) {
        const auto& gauss = dist.gaussians[static_cast<std::size_t>(g)];
        ll += log_normal_pdf(raw.at(t, static_cast<std::size_t>(kNumBinary + g)), gauss.mean,
                             gauss.stddev);
      }
      scores.log_lik[t * kNumPhases + static_cast<std::size_t>(s)] = ll;
    }
  }
  return scores;
}

EmissionScores scores_from_discrete(const DiscreteEmissionTable& emission,
                                    std::span<const int> obs) {
  EmissionScores scores;
  scores.n_frames = obs.size();
  scores.n_states = emission.n_states;
  scores.log_lik.assign(obs.size() * static_cast<std::size_t>(emission.n_states), 0.0);
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (obs[t] < 0 || obs[t] >= emission.n_symbols) {
      throw DataError("scores_from_discrete: symbol out of range at t=" + std::to_string(t));
    }
    for (int s = 0; s < emission.n_states; ++s) {
      const double p = emission.at(s, obs[t]);
      scores.log_lik[t * static_cast<std::size_t>(emission.n_states) +
                     static_cast<std::size_t>(s)] = p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  return scores;
}

ForwardResult forward_filter(const TransitionModel& trans, const EmissionScores& scores) {
  check_scores(trans, scores);
  const int n = trans.n_states;
  const std::size_t nu = static_cast<std::size_t>(n);
  const std::size_t frames = scores.n_frames;

  ForwardResult result;
  result.n_frames = frames;
  result.n_states = n;
  result.posteriors.assign(frames * nu, 0.0);
  result.log_likelihood = 0.0;

  std::vector<double> alpha(nu, 0.0);
  std::vector<double> next(nu, 0.0);

  for (std::size_t t = 0; t < frames; ++t) {
    // Shift emissions by the per-frame maximum so exp() never underflows to
    // an all-zero step; the shift is folded back into the scaling factor.
    double shift = kNegInf;
    for (int s = 0; s < n; ++s) shift = std::max(shift, scores.at(t, s));
    if (shift == kNegInf) {
      throw NumericError("impossible observation at t=" + std::to_string(t));
    }

    double mass = 0.0;
    if (t == 0) {
      for (int s = 0; s < n; ++s) {
        next[static_cast<std::size_t>(s)] =
            trans.pi[static_cast<std::size_t>(s)] * std::exp(scores.at(t, s) - shift);
        mass += next[static_cast<std::size_t>(s)];
      }
    } else {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i <= j; ++i) {  // left-to-right: a[i][j] = 0 below the diagonal
          acc += alpha[static_cast<std::size_t>(i)] * trans.at(i, j);
        }
        next[static_cast<std::size_t>(j)] = acc * std::exp(scores.at(t, j) - shift);
        mass += next[static_cast<std::size_t>(j)];
      }
    }
    if (mass <= 0.0) {
      throw NumericError("impossible observation at t=" + std::to_string(t));
    }
    result.log_likelihood += std::log(mass) + shift;
    for (int s = 0; s < n; ++s) {
      next[static_cast<std::size_t>(s)] /= mass;
      result.posteriors[t * nu + static_cast<std::size_t>(s)] = next[static_cast<std::size_t>(s)];
    }
    std::swap(alpha, next);
  }
  return result;
}

std::vector<int> viterbi_decode(const TransitionModel& trans, const EmissionScores& scores) {
  check_scores(trans, scores);
  const int n = trans.n_states;
  const std::size_t nu = static_cast<std::size_t>(n);
  const std::size_t frames = scores.n_frames;

  std::vector<double> log_a(nu * nu, kNegInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = trans.at(i, j);
      if (a > 0.0) log_a[static_cast<std::size_t>(i) * nu + static_cast<std::size_t>(j)] = std::log(a);
    }
  }

  std::vector<double> delta(nu, kNegInf);
  std::vector<double> next(nu, kNegInf);
  std::vector<int> backptr(frames * nu, -1);

  bool start_feasible = false;
  for (int s = 0; s < n; ++s) {
    const double p = trans.pi[static_cast<std::size_t>(s)];
    delta[static_cast<std::size_t>(s)] = (p > 0.0 ? std::log(p) : kNegInf) + scores.at(0, s);
    if (delta[static_cast<std::size_t>(s)] > kNegInf) start_feasible = true;
  }
  if (!start_feasible) {
    throw NumericError("impossible observation at t=0");
  }

  for (std::size_t t = 1; t < frames; ++t) {
    bool any_feasible = false;
    for (int j = 0; j < n; ++j) {
      double best = kNegInf;
      int best_prev = -1;
      for (int i = 0; i <= j; ++i) {
        const double cand =
            delta[static_cast<std::size_t>(i)] +
            log_a[static_cast<std::size_t>(i) * nu + static_cast<std::size_t>(j)];
        if (cand > best) {  // strict: ties keep the lower previous state
          best = cand;
          best_prev = i;
        }
      }
      next[static_cast<std::size_t>(j)] = best + scores.at(t, j);
      backptr[t * nu + static_cast<std::size_t>(j)] = best_prev;
      if (next[static_cast<std::size_t>(j)] > kNegInf) any_feasible = true;
    }
    if (!any_feasible) {
      throw NumericError("impossible observation at t=" + std::to_string(t));
    }
    std::swap(delta, next);
  }

  int best_state = -1;
  double best = kNegInf;
  for (int s = 0; s < n; ++s) {
    if (delta[static_cast<std::size_t>(s)] > best) {
      best = delta[static_cast<std::size_t>(s)];
      best_state = s;
    }
  }
  if (best_state < 0) {
    throw NumericError("impossible observation at t=0");
  }

  std::vector<int> path(frames);
  path[frames - 1] = best_state;
  for (std::size_t t = frames - 1; t > 0; --t) {
    path[t - 1] = backptr[t * nu + static_cast<std::size_t>(path[t])];
  }
  return path;
}

BaumWelchResult baum_welch(const TransitionModel& trans, const DiscreteEmissionTable& emission,
                           const std::vector<std::vector<int>>& obs_sequences,
                           const BaumWelchOptions& opts) {
  if (obs_sequences.empty()) throw DataError("baum_welch: no observation sequences");
  if (trans.n_states != emission.n_states) {
    throw DataError("baum_welch: transition and emission state counts differ");
  }
  if (opts.max_iter < 1) throw DataError("baum_welch: max_iter must be >= 1");
  const int n = trans.n_states;
  const int m = emission.n_symbols;
  const std::size_t nu = static_cast<std::size_t>(n);
  for (const auto& seq : obs_sequences) {
    if (seq.empty()) throw DataError("baum_welch: empty observation sequence");
    for (const int o : seq) {
      if (o < 0 || o >= m) throw DataError("baum_welch: symbol out of range");
    }
  }

  BaumWelchResult result;
  result.trans = trans;
  result.emission = emission;

  std::vector<double> alpha_hat;   // T x n
  std::vector<double> beta_hat;    // T x n
  std::vector<double> scale;       // T

  for (int iter = 0;; ++iter) {
    std::vector<double> xi_acc(nu * nu, 0.0);
    std::vector<double> gamma_emit(nu * static_cast<std::size_t>(m), 0.0);
    std::vector<double> gamma_tot(nu, 0.0);
    double total_ll = 0.0;

    for (std::size_t q = 0; q < obs_sequences.size(); ++q) {
      const auto& obs = obs_sequences[q];
      const std::size_t frames = obs.size();
      alpha_hat.assign(frames * nu, 0.0);
      beta_hat.assign(frames * nu, 0.0);
      scale.assign(frames, 0.0);

      // Scaled forward pass.
      for (std::size_t t = 0; t < frames; ++t) {
        double mass = 0.0;
        for (int j = 0; j < n; ++j) {
          double v;
          if (t == 0) {
            v = result.trans.pi[static_cast<std::size_t>(j)];
          } else {
            v = 0.0;
            for (int i = 0; i <= j; ++i) {
              v += alpha_hat[(t - 1) * nu + static_cast<std::size_t>(i)] * result.trans.at(i, j);
            }
          }
          v *= result.emission.at(j, obs[t]);
          alpha_hat[t * nu + static_cast<std::size_t>(j)] = v;
          mass += v;
        }
        if (mass <= 0.0) {
          throw NumericError("baum_welch: impossible observation in sequence " +
                             std::to_string(q) + " at t=" + std::to_string(t));
        }
        scale[t] = mass;
        for (int j = 0; j < n; ++j) alpha_hat[t * nu + static_cast<std::size_t>(j)] /= mass;
        total_ll += std::log(mass);
      }

      // Scaled backward pass.
      for (int j = 0; j < n; ++j) beta_hat[(frames - 1) * nu + static_cast<std::size_t>(j)] = 1.0;
      for (std::size_t t = frames - 1; t > 0; --t) {
        for (int i = 0; i < n; ++i) {
          double v = 0.0;
          for (int j = i; j < n; ++j) {
            v += result.trans.at(i, j) * result.emission.at(j, obs[t]) *
                 beta_hat[t * nu + static_cast<std::size_t>(j)];
          }
          beta_hat[(t - 1) * nu + static_cast<std::size_t>(i)] = v / scale[t];
        }
      }

      // Accumulate expected counts.
      for (std::size_t t = 0; t < frames; ++t) {
        for (int i = 0; i < n; ++i) {
          const double gamma = alpha_hat[t * nu + static_cast<std::size_t>(i)] *
                               beta_hat[t * nu + static_cast<std::size_t>(i)];
          gamma_tot[static_cast<std::size_t>(i)] += gamma;
          gamma_emit[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                     static_cast<std::size_t>(obs[t])] += gamma;
        }
        if (t + 1 < frames) {
          for (int i = 0; i < n; ++i) {
            const double a_i = alpha_hat[t * nu + static_cast<std::size_t>(i)];
            if (a_i == 0.0) continue;
            for (int j = i; j < n; ++j) {
              const double a = result.trans.at(i, j);
              if (a == 0.0) continue;
              xi_acc[static_cast<std::size_t>(i) * nu + static_cast<std::size_t>(j)] +=
                  a_i * a * result.emission.at(j, obs[t + 1]) *
                  beta_hat[(t + 1) * nu + static_cast<std::size_t>(j)] / scale[t + 1];
            }
          }
        }
      }
    }

    result.likelihood_trace.push_back(total_ll);
    if (iter > 0 &&
        total_ll - result.likelihood_trace[static_cast<std::size_t>(iter) - 1] < opts.tol) {
      break;
    }
    if (iter >= opts.max_iter) break;

    // M-step. Rows with no expected outgoing mass keep their old values;
    // entries that start at zero receive zero expected mass, so structural
    // zeros survive every update.
    for (int i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        row_sum += xi_acc[static_cast<std::size_t>(i) * nu + static_cast<std::size_t>(j)];
      }
      if (row_sum <= 0.0) continue;
      for (int j = 0; j < n; ++j) {
        result.trans.at(i, j) =
            xi_acc[static_cast<std::size_t>(i) * nu + static_cast<std::size_t>(j)] / row_sum;
      }
    }
    if (opts.update_emissions) {
      for (int s = 0; s < n; ++s) {
        if (gamma_tot[static_cast<std::size_t>(s)] <= 0.0) continue;
        for (int o = 0; o < m; ++o) {
          result.emission.at(s, o) =
              gamma_emit[static_cast<std::size_t>(s) * static_cast<std::size_t>(m) +
                         static_cast<std::size_t>(o)] /
              gamma_tot[static_cast<std::size_t>(s)];
        }
      }
    }
  }
  return result;
}

namespace {

nlohmann::ordered_json transitions_to_json(const TransitionModel& t) {
  nlohmann::ordered_json j;
  j["n_states"] = t.n_states;
  j["structure"] = to_string(t.structure);
  j["pi"] = t.pi;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int i = 0; i < t.n_states; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int k = 0; k < t.n_states; ++k) row.push_back(t.at(i, k));
    rows.push_back(std::move(row));
  }
  j["A"] = std::move(rows);
  return j;
}

TransitionModel transitions_from_json(const nlohmann::json& j) {
  TransitionModel t;
  t.n_states = j.at("n_states").get<int>();
  if (t.n_states < 1) throw DataError("hmm model: bad n_states");
  t.structure = structure_from_string(j.at("structure").get<std::string>());
  t.pi = j.at("pi").get<std::vector<double>>();
  if (t.pi.size() != static_cast<std::size_t>(t.n_states)) {
    throw DataError("hmm model: pi length mismatch");
  }
  const auto rows = j.at("A");
  if (rows.size() != static_cast<std::size_t>(t.n_states)) {
    throw DataError("hmm model: A row count mismatch");
  }
  t.a.reserve(static_cast<std::size_t>(t.n_states) * static_cast<std::size_t>(t.n_states));
  for (const auto& row : rows) {
    const auto vals = row.get<std::vector<double>>();
    if (vals.size() != static_cast<std::size_t>(t.n_states)) {
      throw DataError("hmm model: A column count mismatch");
    }
    t.a.insert(t.a.end(), vals.begin(), vals.end());
  }
  return t;
}

nlohmann::ordered_json discrete_to_json(const DiscreteEmissionTable& e) {
  nlohmann::ordered_json j;
  j["kind"] = "discrete";
  j["n_states"] = e.n_states;
  j["n_symbols"] = e.n_symbols;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int s = 0; s < e.n_states; ++s) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int o = 0; o < e.n_symbols; ++o) row.push_back(e.at(s, o));
    rows.push_back(std::move(row));
  }
  j["B"] = std::move(rows);
  return j;
}

DiscreteEmissionTable discrete_from_json(const nlohmann::json& j) {
  DiscreteEmissionTable e;
  e.n_states = j.at("n_states").get<int>();
  e.n_symbols = j.at("n_symbols").get<int>();
  for (const auto& row : j.at("B")) {
    const auto vals = row.get<std::vector<double>>();
    if (vals.size() != static_cast<std::size_t>(e.n_symbols)) {
      throw DataError("hmm model: B column count mismatch");
    }
    e.b.insert(e.b.end(), vals.begin(), vals.end());
  }
  if (e.b.size() !=
      static_cast<std::size_t>(e.n_states) * static_cast<std::size_t>(e.n_symbols)) {
    throw DataError("hmm model: B row count mismatch");
  }
  return e;
}

nlohmann::ordered_json signal_to_json(const SignalEmissionModel& e) {
  nlohmann::ordered_json j;
  j["kind"] = "signal";
  nlohmann::ordered_json states = nlohmann::ordered_json::array();
  for (const auto& st : e.states) {
    nlohmann::ordered_json s;
    s["on_prob"] = st.on_prob;
    nlohmann::ordered_json gs = nlohmann::ordered_json::array();
    for (const auto& g : st.gaussians) gs.push_back({{"mean", g.mean}, {"stddev", g.stddev}});
    s["gaussians"] = std::move(gs);
    states.push_back(std::move(s));
  }
  j["states"] = std::move(states);
  return j;
}

SignalEmissionModel signal_from_json(const nlohmann::json& j) {
  SignalEmissionModel e;
  const auto& states = j.at("states");
  if (states.size() != kNumPhases) throw DataError("hmm model: bad signal state count");
  for (std::size_t s = 0; s < kNumPhases; ++s) {
    const auto on = states[s].at("on_prob").get<std::vector<double>>();
    if (on.size() != kNumBinary) throw DataError("hmm model: bad on_prob length");
    std::copy(on.begin(), on.end(), e.states[s].on_prob.begin());
    const auto& gs = states[s].at("gaussians");
    if (gs.size() != kNumAnalog + 1) throw DataError("hmm model: bad gaussian count");
    for (std::size_t g = 0; g < kNumAnalog + 1; ++g) {
      e.states[s].gaussians[g] = {gs[g].at("mean").get<double>(),
                                  gs[g].at("stddev").get<double>()};
    }
  }
  return e;
}

}  // namespace

std::string hmm_to_json(const HmmModel& model) {
  if (model.discrete.has_value() == model.signal.has_value()) {
    throw DataError("hmm model: exactly one emission family required");
  }
  nlohmann::ordered_json j;
  j["kind"] = "hmm";
  j["transitions"] = transitions_to_json(model.trans);
  j["emission"] =
      model.discrete ? discrete_to_json(*model.discrete) : signal_to_json(*model.signal);
  return j.dump(2) + "\n";
}

HmmModel hmm_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("hmm model: invalid JSON: ") + e.what());
  }
  if (j.value("kind", "") != "hmm") throw DataError("hmm model: missing kind 'hmm'");
  HmmModel model;
  model.trans = transitions_from_json(j.at("transitions"));
  const auto& em = j.at("emission");
  const std::string kind = em.value("kind", "");
  if (kind == "discrete") {
    model.discrete = discrete_from_json(em);
  } else if (kind == "signal") {
    model.signal = signal_from_json(em);
  } else {
    throw DataError("hmm model: unknown emission kind '" + kind + "'");
  }
  return model;
}

void save_hmm(const HmmModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, hmm_to_json(model));
}

HmmModel load_hmm(const std::filesystem::path& path) { return hmm_from_json(read_file(path)); }

}  // namespace phasedet
