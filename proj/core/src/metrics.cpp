#include "phasedet/metrics.hpp"

#include <nlohmann/json.hpp>

#include "phasedet/error.hpp"
#include "phasedet/io.hpp"

namespace phasedet {

double frame_accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DataError("frame_accuracy: length mismatch");
  if (truth.empty()) throw DataError("frame_accuracy: empty input");
  std::size_t matches = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] == predicted[t]) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(truth.size());
}

std::array<std::optional<double>, kNumPhases> jaccard_scores(std::span<const int> truth,
                                                             std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DataError("jaccard_scores: length mismatch");
  std::array<std::int64_t, kNumPhases> intersection{};
  std::array<std::int64_t, kNumPhases> unions{};
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!is_valid_phase(truth[t]) || !is_valid_phase(predicted[t])) {
      throw DataError("jaccard_scores: label out of range");
    }
    if (truth[t] == predicted[t]) {
      ++intersection[static_cast<std::size_t>(truth[t])];
      ++unions[static_cast<std::size_t>(truth[t])];
    } else {
      ++unions[static_cast<std::size_t>(truth[t])];
      ++unions[static_cast<std::size_t>(predicted[t])];
    }
  }
  std::array<std::optional<double>, kNumPhases> out{};
  for (int p = 0; p < kNumPhases; ++p) {
    const auto pu = static_cast<std::size_t>(p);
    if (unions[pu] > 0) {
      out[pu] = static_cast<double>(intersection[pu]) / static_cast<double>(unions[pu]);
    }
  }
  return out;
}

double mean_jaccard(const std::array<std::optional<double>, kNumPhases>& scores) {
  double sum = 0.0;
  int count = 0;
  for (const auto& s : scores) {
    if (s) {
      sum += *s;
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

double accuracy_from_confusion(const Confusion& confusion) {
  std::int64_t diag = 0;
  std::int64_t total = 0;
  for (int i = 0; i < kNumPhases; ++i) {
    for (int j = 0; j < kNumPhases; ++j) {
      total += confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    diag += confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  }
  if (total == 0) throw DataError("accuracy_from_confusion: empty confusion matrix");
  return static_cast<double>(diag) / static_cast<double>(total);
}

std::array<std::optional<double>, kNumPhases> jaccard_from_confusion(const Confusion& confusion) {
  std::array<std::optional<double>, kNumPhases> out{};
  for (int p = 0; p < kNumPhases; ++p) {
    const auto pu = static_cast<std::size_t>(p);
    std::int64_t row = 0;
    std::int64_t col = 0;
    for (int j = 0; j < kNumPhases; ++j) {
      row += confusion[pu][static_cast<std::size_t>(j)];
      col += confusion[static_cast<std::size_t>(j)][pu];
    }
    const std::int64_t inter = confusion[pu][pu];
    const std::int64_t uni = row + col - inter;
    if (uni > 0) out[pu] = static_cast<double>(inter) / static_cast<double>(uni);
  }
  return out;
}

namespace {

nlohmann::ordered_json jaccard_to_json(
    const std::array<std::optional<double>, kNumPhases>& scores) {
  nlohmann::ordered_json j;
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& s = scores[static_cast<std::size_t>(p)];
    if (s) {
      j[std::string(phase_name(p))] = *s;
    } else {
      j[std::string(phase_name(p))] = nullptr;
    }
  }
  return j;
}

std::array<std::optional<double>, kNumPhases> jaccard_from_json(const nlohmann::json& j) {
  std::array<std::optional<double>, kNumPhases> out{};
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& v = j.at(std::string(phase_name(p)));
    if (!v.is_null()) out[static_cast<std::size_t>(p)] = v.get<double>();
  }
  return out;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["mean_jaccard"] = report.mean_jaccard;
  j["jaccard_per_phase"] = jaccard_to_json(report.jaccard_per_phase);
  j["confusion"] = report.confusion;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& fold : report.per_fold) {
    nlohmann::ordered_json f;
    f["held_out_id"] = fold.held_out_id;
    f["accuracy"] = fold.accuracy;
    f["mean_jaccard"] = fold.mean_jaccard;
    f["jaccard_per_phase"] = jaccard_to_json(fold.jaccard_per_phase);
    folds.push_back(std::move(f));
  }
  j["per_fold"] = std::move(folds);
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("metrics report: invalid JSON: ") + e.what());
  }
  MetricsReport report;
  report.accuracy = j.at("accuracy").get<double>();
  report.mean_jaccard = j.at("mean_jaccard").get<double>();
  report.jaccard_per_phase = jaccard_from_json(j.at("jaccard_per_phase"));
  const auto conf = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
  if (conf.size() != kNumPhases) throw DataError("metrics report: bad confusion shape");
  for (std::size_t i = 0; i < kNumPhases; ++i) {
    if (conf[i].size() != kNumPhases) throw DataError("metrics report: bad confusion shape");
    std::copy(conf[i].begin(), conf[i].end(), report.confusion[i].begin());
  }
  for (const auto& f : j.at("per_fold")) {
    FoldResult fold;
    fold.held_out_id = f.at("held_out_id").get<std::string>();
    fold.accuracy = f.at("accuracy").get<double>();
    fold.mean_jaccard = f.at("mean_jaccard").get<double>();
    fold.jaccard_per_phase = jaccard_from_json(f.at("jaccard_per_phase"));
    report.per_fold.push_back(std::move(fold));
  }
  return report;
}

std::string report_to_csv(const MetricsReport& report) {
  std::string out = "fold,accuracy,mean_jaccard\n";
  for (const auto& fold : report.per_fold) {
    out += fold.held_out_id;
    out.push_back(',');
    out += format_double(fold.accuracy);
    out.push_back(',');
    out += format_double(fold.mean_jaccard);
    out.push_back('\n');
  }
  return out;
}

}  // namespace phasedet
