#include "phasedet/loso.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "phasedet/error.hpp"
#include "phasedet/rng.hpp"

namespace phasedet {

namespace {

constexpr std::uint64_t kFoldForestStream = 21;
constexpr std::uint64_t kFoldSplitStream = 22;

struct FoldOutcome {
  FoldResult result;
  Confusion confusion{};
  FoldPrediction prediction;
};

std::vector<SurgeryRecording> all_but(const std::vector<SurgeryRecording>& surgeries,
                                      std::size_t held_out) {
  std::vector<SurgeryRecording> out;
  out.reserve(surgeries.size() - 1);
  for (std::size_t i = 0; i < surgeries.size(); ++i) {
    if (i != held_out) out.push_back(surgeries[i]);
  }
  return out;
}

FoldOutcome run_fold(const std::vector<SurgeryRecording>& surgeries, std::size_t fold,
                     const EvalSpec& spec, int fold_jobs) {
  const SurgeryRecording& held_out = surgeries[fold];
  const auto training = all_but(surgeries, fold);

  FoldOutcome outcome;
  outcome.prediction.held_out_id = held_out.id;
  outcome.prediction.truth = held_out.labels;

  switch (spec.method) {
    case EvalMethod::kRf: {
      FeatureMatrix features;
      std::vector<int> labels;
      features.mode = spec.mode;
      features.n_cols = static_cast<std::size_t>(feature_count(spec.mode));
      for (const auto& rec : training) {
        const auto m = build_features(rec, spec.mode, spec.window);
        if (features.names.empty()) features.names = m.names;
        features.values.insert(features.values.end(), m.values.begin(), m.values.end());
        features.n_rows += m.n_rows;
        labels.insert(labels.end(), rec.labels.begin(), rec.labels.end());
      }
      auto params = spec.forest;
      params.seed = derive_seed(spec.seed, kFoldForestStream, fold);
      const auto model = train_forest(features, labels, params, fold_jobs);
      const auto test = build_features(held_out, spec.mode, spec.window);
      std::vector<int> predicted(test.n_rows);
      for (std::size_t t = 0; t < test.n_rows; ++t) {
        predicted[t] = forest_predict(model, test.row(t));
      }
      outcome.prediction.rows.emplace_back("rf", std::move(predicted));
      break;
    }
    case EvalMethod::kHmmSignal: {
      std::vector<FeatureMatrix> features;
      std::vector<std::vector<int>> labels;
      for (const auto& rec : training) {
        features.push_back(build_features(rec, FeatureMode::kRaw, spec.window));
        labels.push_back(rec.labels);
      }
      const auto emissions = fit_signal_emissions(features, labels);
      const auto trans = init_transitions_from_labels(labels, spec.structure, spec.smoothing);
      const auto test = build_features(held_out, FeatureMode::kRaw, spec.window);
      const auto scores = scores_from_signals(emissions, test);
      std::vector<int> predicted;
      if (spec.decode == DecodeMode::kViterbi) {
        predicted = viterbi_decode(trans, scores);
      } else {
        const auto forward = forward_filter(trans, scores);
        predicted.resize(scores.n_frames);
        for (std::size_t t = 0; t < scores.n_frames; ++t) {
          int best = 0;
          for (int s = 1; s < kNumPhases; ++s) {
            if (forward.at(t, s) > forward.at(t, best)) best = s;
          }
          predicted[t] = best;
        }
      }
      outcome.prediction.rows.emplace_back("hmm", std::move(predicted));
      break;
    }
    case EvalMethod::kCombined: {
      CombinedParams params;
      params.forest = spec.forest;
      params.forest.seed = derive_seed(spec.seed, kFoldForestStream, fold);
      params.mode = spec.mode;
      params.window = spec.window;
      params.split_fraction = spec.split_fraction;
      params.split_seed = derive_seed(spec.seed, kFoldSplitStream, fold);
      params.smoothing = spec.smoothing;
      params.decode = spec.decode;
      params.structure = spec.structure;
      params.bw = spec.bw;
      const auto model = train_combined(training, params, fold_jobs);
      auto rf_seq = rf_symbols(model, held_out);
      auto final_seq =
          predict_phases(model, held_out,
                         spec.decode == DecodeMode::kViterbi ? PredictMethod::kHmmViterbi
                                                             : PredictMethod::kHmmFiltering);
      outcome.prediction.rows.emplace_back("rf", std::move(rf_seq));
      outcome.prediction.rows.emplace_back("combined", std::move(final_seq));
      break;
    }
  }

  const auto& predicted = outcome.prediction.rows.back().second;
  outcome.result.held_out_id = held_out.id;
  outcome.result.accuracy = frame_accuracy(held_out.labels, predicted);
  outcome.result.jaccard_per_phase = jaccard_scores(held_out.labels, predicted);
  outcome.result.mean_jaccard = mean_jaccard(outcome.result.jaccard_per_phase);
  outcome.confusion = confusion_matrix(held_out.labels, predicted);
  return outcome;
}

}  // namespace

EvalMethod eval_method_from_string(std::string_view s) {
  if (s == "rf") return EvalMethod::kRf;
  if (s == "hmm") return EvalMethod::kHmmSignal;
  if (s == "combined") return EvalMethod::kCombined;
  throw DataError("unknown eval method: " + std::string(s));
}

std::string_view to_string(EvalMethod method) {
  switch (method) {
    case EvalMethod::kRf: return "rf";
    case EvalMethod::kHmmSignal: return "hmm";
    case EvalMethod::kCombined: return "combined";
  }
  throw DataError("invalid eval method");
}

MetricsReport loso_cross_validate(const std::vector<SurgeryRecording>& surgeries,
                                  const EvalSpec& spec,
                                  std::vector<FoldPrediction>* fold_predictions) {
  if (surgeries.size() < 2) {
    throw DataError("leave-one-out requires at least 2 surgeries");
  }
  if (spec.method == EvalMethod::kCombined && surgeries.size() < 3) {
    throw DataError("combined method requires at least 3 surgeries "
                    "(its training side is split again)");
  }
  for (const auto& rec : surgeries) {
    if (!rec.labeled()) throw DataError("loso: unlabeled surgery " + rec.id);
  }

  const std::size_t n_folds = surgeries.size();
  std::vector<FoldOutcome> outcomes(n_folds);
  const int jobs = std::max(1, spec.jobs);
  const int fold_workers = static_cast<int>(std::min<std::size_t>(jobs, n_folds));
  // Whatever parallelism is left over goes into tree training inside a fold.
  const int tree_jobs = std::max(1, jobs / fold_workers);

  std::exception_ptr failure;
  std::mutex failure_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t fold = next.fetch_add(1);
      if (fold >= n_folds) break;
      auto store = [&](std::exception_ptr e) {
        const std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::move(e);  // first failure wins
      };
      try {
        outcomes[fold] = run_fold(surgeries, fold, spec, tree_jobs);
      } catch (const NumericError& e) {
        store(std::make_exception_ptr(
            NumericError("fold '" + surgeries[fold].id + "': " + e.what())));
      } catch (const DataError& e) {
        store(std::make_exception_ptr(
            DataError("fold '" + surgeries[fold].id + "': " + e.what())));
      } catch (...) {
        store(std::current_exception());
      }
    }
  };

  if (fold_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(fold_workers));
    for (int w = 0; w < fold_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  MetricsReport report;
  for (auto& outcome : outcomes) {
    for (int i = 0; i < kNumPhases; ++i) {
      for (int j = 0; j < kNumPhases; ++j) {
        report.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
            outcome.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    report.per_fold.push_back(std::move(outcome.result));
    if (fold_predictions) fold_predictions->push_back(std::move(outcome.prediction));
  }
  report.accuracy = accuracy_from_confusion(report.confusion);
  report.jaccard_per_phase = jaccard_from_confusion(report.confusion);
  report.mean_jaccard = mean_jaccard(report.jaccard_per_phase);
  return report;
}

}  // namespace phasedet
