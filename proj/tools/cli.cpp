#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>

#include "phasedet/combined.hpp"
#include "phasedet/error.hpp"
#include "phasedet/features.hpp"
#include "phasedet/forest.hpp"
#include "phasedet/hmm.hpp"
#include "phasedet/io.hpp"
#include "phasedet/loso.hpp"
#include "phasedet/metrics.hpp"
#include "phasedet/recording.hpp"
#include "phasedet/rng.hpp"
#include "phasedet/synth.hpp"
#include "phasedet/timeline.hpp"

namespace phasedet::cli {

namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  int n = 0;
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

struct FeaturesArgs {
  std::string mode = "raw";
  int window = static_cast<int>(kDefaultMedianWindow);
  std::string in;
  std::string out;
};

struct TrainArgs {
  std::string method;
  std::string mode = "raw";
  std::string data;
  std::uint64_t seed = 0;
  std::string model_out;
};

struct EvalArgs {
  std::string method;
  std::string mode = "raw";
  std::string decode = "viterbi";
  std::string data;
  std::uint64_t seed = 0;
  std::string report;
  std::string svg;
  std::string csv;
  int jobs = 1;
};

struct PlotArgs {
  std::string truth;
  std::vector<std::string> pred;
  std::string out;
};

std::vector<SurgeryRecording> load_labeled_dataset(const std::string& dir) {
  auto surgeries = load_dataset(dir);
  for (const auto& rec : surgeries) {
    if (!rec.labeled()) {
      throw DataError(rec.id + ": recording has no phase labels");
    }
  }
  return surgeries;
}

std::string features_to_csv(const FeatureMatrix& m, const std::vector<int>& labels) {
  std::string out;
  for (std::size_t c = 0; c < m.names.size(); ++c) {
    if (c > 0) out.push_back(',');
    out += m.names[c];
  }
  if (!labels.empty()) out += ",phase";
  out.push_back('\n');
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    for (std::size_t c = 0; c < m.n_cols; ++c) {
      if (c > 0) out.push_back(',');
      out += format_double(m.at(r, c));
    }
    if (!labels.empty()) {
      out.push_back(',');
      out += std::to_string(labels[r] + 1);
    }
    out.push_back('\n');
  }
  return out;
}

// Prediction files for `plot`: either a plain `t,phase` series or a full
// recording CSV whose labels act as the prediction.
std::vector<int> load_prediction_series(const fs::path& path) {
  const std::string text = read_file(path);
  if (text.rfind("t,b01", 0) == 0) {
    const auto rec = load_recording(path, {.strict = false});
    if (!rec.labeled()) {
      throw DataError(path.string() + ": recording has no phase labels to plot");
    }
    return rec.labels;
  }

  std::vector<int> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "t,phase") {
        throw DataError(path.string() + ": expected header 't,phase' or a recording CSV");
      }
      saw_header = true;
      continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected t,phase");
    }
    const std::string_view field = line.substr(comma + 1);
    int phase = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), phase);
    if (ec != std::errc() || ptr != field.data() + field.size() || phase < 1 ||
        phase > kNumPhases) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": phase must be in 1..7");
    }
    out.push_back(phase - 1);
  }
  if (out.empty()) {
    throw DataError(path.string() + ": no prediction rows");
  }
  return out;
}

int run_synth(const SynthArgs& args, std::ostream& out) {
  SynthConfig config = SynthConfig::noisy_default();
  if (!args.config.empty()) {
    config = load_synth_config(args.config, config);
  }
  config.seed = args.seed;  // the flag wins over the config file

  const auto dataset = generate_dataset(config, args.n, args.seed);
  const fs::path dir(args.out);
  for (const auto& rec : dataset) {
    save_recording(rec, dir / (rec.id + ".csv"));
  }
  save_synth_config(config, dir / "synth.cfg");
  out << "wrote " << dataset.size() << " recordings to " << dir.string() << "\n";
  return 0;
}

int run_features(const FeaturesArgs& args, std::ostream& out) {
  if (args.window < 1) throw DataError("--window must be >= 1");
  const auto mode = feature_mode_from_string(args.mode);
  const auto surgeries = load_dataset(args.in);
  const fs::path dir(args.out);
  for (const auto& rec : surgeries) {
    const auto m = build_features(rec, mode, static_cast<std::size_t>(args.window));
    write_file_atomic(dir / (rec.id + ".csv"), features_to_csv(m, rec.labels));
  }
  out << "wrote " << surgeries.size() << " feature files to " << dir.string() << "\n";
  return 0;
}

int run_train(const TrainArgs& args, std::ostream& out) {
  const auto mode = feature_mode_from_string(args.mode);
  const auto surgeries = load_labeled_dataset(args.data);
  const fs::path model_path(args.model_out);

  if (args.method == "rf") {
    FeatureMatrix features;
    std::vector<int> labels;
    features.mode = mode;
    features.n_cols = static_cast<std::size_t>(feature_count(mode));
    for (const auto& rec : surgeries) {
      const auto m = build_features(rec, mode);
      if (features.names.empty()) features.names = m.names;
      features.values.insert(features.values.end(), m.values.begin(), m.values.end());
      features.n_rows += m.n_rows;
      labels.insert(labels.end(), rec.labels.begin(), rec.labels.end());
    }
    ForestParams params;
    params.seed = args.seed;
    const auto model = train_forest(features, labels, params);
    save_forest(model, model_path);
  } else if (args.method == "hmm") {
    if (mode != FeatureMode::kRaw) {
      throw DataError("the hmm baseline models raw signals; use --mode raw");
    }
    std::vector<FeatureMatrix> features;
    std::vector<std::vector<int>> labels;
    for (const auto& rec : surgeries) {
      features.push_back(build_features(rec, FeatureMode::kRaw));
      labels.push_back(rec.labels);
    }
    HmmModel model;
    model.signal = fit_signal_emissions(features, labels);
    model.trans =
        init_transitions_from_labels(labels, TransitionStructure::kUpperTriangular, 1e-6);
    save_hmm(model, model_path);
  } else {  // combined
    CombinedParams params;
    params.mode = mode;
    params.forest.seed = derive_seed(args.seed, 101);
    params.split_seed = derive_seed(args.seed, 102);
    const auto model = train_combined(surgeries, params);
    save_combined(model, model_path);
  }
  out << "wrote model to " << model_path.string() << "\n";
  return 0;
}

int run_eval(const EvalArgs& args, std::ostream& out) {
  if (args.jobs < 1) throw DataError("--jobs must be >= 1");
  EvalSpec spec;
  spec.method = eval_method_from_string(args.method);
  spec.mode = feature_mode_from_string(args.mode);
  spec.decode = decode_mode_from_string(args.decode);
  spec.seed = args.seed;
  spec.jobs = args.jobs;
  if (spec.method == EvalMethod::kHmmSignal && spec.mode != FeatureMode::kRaw) {
    throw DataError("the hmm baseline models raw signals; use --mode raw");
  }

  const auto surgeries = load_labeled_dataset(args.data);
  std::vector<FoldPrediction> predictions;
  const auto report = loso_cross_validate(surgeries, spec, &predictions);

  for (const auto& fold : report.per_fold) {
    out << "fold " << fold.held_out_id << ": accuracy " << format_double(fold.accuracy)
        << ", mean jaccard " << format_double(fold.mean_jaccard) << "\n";
  }
  out << "pooled accuracy " << format_double(report.accuracy) << ", mean jaccard "
      << format_double(report.mean_jaccard) << "\n";

  write_file_atomic(args.report, report_to_json(report));
  if (!args.csv.empty()) {
    write_file_atomic(args.csv, report_to_csv(report));
  }
  if (!args.svg.empty()) {
    const fs::path svg_dir(args.svg);
    for (const auto& fold : predictions) {
      std::vector<TimelineRow> rows;
      for (const auto& [name, labels] : fold.rows) rows.push_back({name, labels});
      write_file_atomic(svg_dir / (fold.held_out_id + ".svg"),
                        render_timeline_svg(fold.truth, rows));
    }
  }
  return 0;
}

int run_plot(const PlotArgs& args, std::ostream& out) {
  const auto truth = load_recording(args.truth, {.strict = false});
  if (!truth.labeled()) {
    throw DataError(args.truth + ": ground-truth recording has no phase labels");
  }
  std::vector<TimelineRow> rows;
  for (const auto& pred : args.pred) {
    const fs::path path(pred);
    auto labels = load_prediction_series(path);
    if (labels.size() != truth.labels.size()) {
      throw DataError(path.string() + ": prediction length " + std::to_string(labels.size()) +
                      " does not match ground truth length " +
                      std::to_string(truth.labels.size()));
    }
    rows.push_back({path.stem().string(), std::move(labels)});
  }
  write_file_atomic(args.out, render_timeline_svg(truth.labels, rows));
  out << "wrote " << args.out << "\n";
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Surgical workflow phase detection from intra-operative signals"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
  synth->add_option("--n", synth_args.n, "Number of surgeries")->required();
  synth->add_option("--seed", synth_args.seed, "Master seed")->required();
  synth->add_option("--config", synth_args.config, "Generator config file (key = value)");
  synth->add_option("--out", synth_args.out, "Output directory")->required();

  FeaturesArgs features_args;
  auto* features = app.add_subcommand("features", "Build per-frame feature matrices");
  features->add_option("--mode", features_args.mode, "Feature mode")
      ->check(CLI::IsMember({"raw", "filtered", "augmented"}));
  features->add_option("--window", features_args.window, "Median filter window (default 120)");
  features->add_option("--in", features_args.in, "Input recording directory")->required();
  features->add_option("--out", features_args.out, "Output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model on a full dataset");
  train->add_option("--method", train_args.method, "Classifier")
      ->check(CLI::IsMember({"rf", "hmm", "combined"}))
      ->required();
  train->add_option("--mode", train_args.mode, "Feature mode")
      ->check(CLI::IsMember({"raw", "filtered", "augmented"}));
  train->add_option("--data", train_args.data, "Labeled recording directory")->required();
  train->add_option("--seed", train_args.seed, "Training seed")->required();
  train->add_option("--model-out", train_args.model_out, "Model output path")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Leave-one-surgery-out cross validation");
  eval->add_option("--method", eval_args.method, "Classifier")
      ->check(CLI::IsMember({"rf", "hmm", "combined"}))
      ->required();
  eval->add_option("--mode", eval_args.mode, "Feature mode")
      ->check(CLI::IsMember({"raw", "filtered", "augmented"}));
  eval->add_option("--decode", eval_args.decode, "HMM decode mode")
      ->check(CLI::IsMember({"viterbi", "filtering"}));
  eval->add_option("--data", eval_args.data, "Labeled recording directory")->required();
  eval->add_option("--seed", eval_args.seed, "Evaluation seed")->required();
  eval->add_option("--report", eval_args.report, "JSON report output path")->required();
  eval->add_option("--svg", eval_args.svg, "Directory for per-fold timeline SVGs");
  eval->add_option("--csv", eval_args.csv, "Optional per-fold CSV summary path");
  eval->add_option("--jobs", eval_args.jobs, "Worker cap for parallel folds");

  PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "Render a phase timeline SVG");
  plot->add_option("--truth", plot_args.truth, "Ground-truth recording CSV")->required();
  plot->add_option("--pred", plot_args.pred, "Prediction CSVs (t,phase or recording format)")
      ->required()
      ->expected(-1);
  plot->add_option("--out", plot_args.out, "Output SVG path")->required();

  try {
    std::vector<const char*> argv;
    argv.push_back("phasedet");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());

    if (synth->parsed()) return run_synth(synth_args, out);
    if (features->parsed()) return run_features(features_args, out);
    if (train->parsed()) return run_train(train_args, out);
    if (eval->parsed()) return run_eval(eval_args, out);
    if (plot->parsed()) return run_plot(plot_args, out);
    err << app.help();
    return 1;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace phasedet::cli
