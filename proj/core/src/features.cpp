#include "phasedet/features.hpp"

#include <algorithm>
#include <string>

#include "phasedet/error.hpp"

namespace phasedet {

FeatureMode feature_mode_from_string(std::string_view s) {
  if (s == "raw") return FeatureMode::kRaw;
  if (s == "filtered") return FeatureMode::kFiltered;
  if (s == "augmented") return FeatureMode::kAugmented;
  throw DataError("unknown feature mode: " + std::string(s));
}

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kRaw: return "raw";
    case FeatureMode::kFiltered: return "filtered";
    case FeatureMode::kAugmented: return "augmented";
  }
  throw DataError("invalid feature mode");
}

int feature_count(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kRaw: return kNumBinary + kNumAnalog + 1;
    case FeatureMode::kFiltered: return kNumBinary + 2 * kNumAnalog + 1;
    case FeatureMode::kAugmented: return 3 * kNumBinary + 2 * kNumAnalog + 1;
  }
  throw DataError("invalid feature mode");
}

std::vector<double> median_filter(std::span<const double> series, std::size_t window) {
  if (window == 0) throw DataError("median_filter: window must be >= 1");
  if (series.empty()) throw DataError("median_filter: empty series");

  const std::size_t n = series.size();
  const std::size_t reach_left = (window - 1) / 2;
  const std::size_t reach_right = window / 2;

  std::vector<double> out(n);
  std::vector<double> buf;
  buf.reserve(window);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= reach_left ? t - reach_left : 0;
    const std::size_t hi = std::min(n - 1, t + reach_right);
    buf.assign(series.begin() + static_cast<std::ptrdiff_t>(lo),
               series.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    const std::size_t sz = buf.size();
    const std::size_t mid = sz / 2;
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
    if (sz % 2 == 1) {
      out[t] = buf[mid];
    } else {
      const double upper = buf[mid];
      const double lower =
          *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid));
      out[t] = (lower + upper) / 2.0;
    }
  }
  return out;
}

std::vector<double> noise_component(std::span<const double> raw,
                                    std::span<const double> filtered) {
  if (raw.size() != filtered.size()) {
    throw DataError("noise_component: length mismatch");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] - filtered[i];
  return out;
}

namespace {

void check_binary(std::span<const int> series, const char* op) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] != 0 && series[i] != 1) {
      throw DataError(std::string(op) + ": non-binary entry " + std::to_string(series[i]) +
                      " at index " + std::to_string(i));
    }
  }
}

}  // namespace

std::vector<std::int64_t> cumulative_sum(std::span<const int> series) {
  check_binary(series, "cumulative_sum");
  std::vector<std::int64_t> out(series.size());
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    out[i] = acc;
  }
  return out;
}

std::vector<std::int64_t> rising_edge_sum(std::span<const int> series) {
  check_binary(series, "rising_edge_sum");
  std::vector<std::int64_t> out(series.size());
  std::int64_t acc = 0;
  int prev = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] == 1 && prev == 0) ++acc;
    prev = series[i];
    out[i] = acc;
  }
  return out;
}

FeatureMatrix build_features(const SurgeryRecording& rec, FeatureMode mode, std::size_t window) {
  if (rec.frames.empty()) throw DataError(rec.id + ": empty recording");
  if (window == 0) throw DataError("build_features: window must be >= 1");

  const std::size_t n = rec.frames.size();
  FeatureMatrix m;
  m.mode = mode;
  m.n_rows = n;
  m.n_cols = static_cast<std::size_t>(feature_count(mode));
  m.values.assign(n * m.n_cols, 0.0);

  auto channel_name = [](const char* prefix, int i, const char* suffix) {
    std::string s = prefix;
    if (i + 1 < 10) s += '0';
    s += std::to_string(i + 1);
    s += suffix;
    return s;
  };

  for (int b = 0; b < kNumBinary; ++b) m.names.push_back(channel_name("b", b, ""));

  std::vector<std::vector<double>> analog_cols(kNumAnalog, std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    for (int a = 0; a < kNumAnalog; ++a) {
      analog_cols[static_cast<std::size_t>(a)][t] = rec.frames[t].analog[static_cast<std::size_t>(a)];
    }
  }

  std::size_t col = kNumBinary;
  for (std::size_t t = 0; t < n; ++t) {
    for (int b = 0; b < kNumBinary; ++b) {
      m.values[t * m.n_cols + static_cast<std::size_t>(b)] =
          static_cast<double>(rec.frames[t].binary[static_cast<std::size_t>(b)]);
    }
  }

  auto write_column = [&](std::size_t c, const std::vector<double>& values) {
    for (std::size_t t = 0; t < n; ++t) m.values[t * m.n_cols + c] = values[t];
  };

  if (mode == FeatureMode::kRaw) {
    for (int a = 0; a < kNumAnalog; ++a) {
      m.names.push_back(channel_name("a", a, ""));
      write_column(col++, analog_cols[static_cast<std::size_t>(a)]);
    }
  } else {
    std::vector<std::vector<double>> filtered(kNumAnalog);
    for (int a = 0; a < kNumAnalog; ++a) {
      filtered[static_cast<std::size_t>(a)] =
          median_filter(analog_cols[static_cast<std::size_t>(a)], window);
    }
    for (int a = 0; a < kNumAnalog; ++a) {
      m.names.push_back(channel_name("a", a, "_med"));
      write_column(col++, filtered[static_cast<std::size_t>(a)]);
    }
    for (int a = 0; a < kNumAnalog; ++a) {
      m.names.push_back(channel_name("a", a, "_noise"));
      write_column(col++, noise_component(analog_cols[static_cast<std::size_t>(a)],
                                          filtered[static_cast<std::size_t>(a)]));
    }
  }

  m.names.emplace_back("t");
  for (std::size_t t = 0; t < n; ++t) {
    m.values[t * m.n_cols + col] = static_cast<double>(rec.frames[t].t);
  }
  ++col;

  if (mode == FeatureMode::kAugmented) {
    std::vector<int> bin(n);
    for (int b = 0; b < kNumBinary; ++b) {
      for (std::size_t t = 0; t < n; ++t) bin[t] = rec.frames[t].binary[static_cast<std::size_t>(b)];
      const auto cum = cumulative_sum(bin);
      m.names.push_back(channel_name("b", b, "_cum"));
      for (std::size_t t = 0; t < n; ++t) {
        m.values[t * m.n_cols + col] = static_cast<double>(cum[t]);
      }
      ++col;
    }
    for (int b = 0; b < kNumBinary; ++b) {
      for (std::size_t t = 0; t < n; ++t) bin[t] = rec.frames[t].binary[static_cast<std::size_t>(b)];
      const auto edges = rising_edge_sum(bin);
      m.names.push_back(channel_name("b", b, "_edges"));
      for (std::size_t t = 0; t < n; ++t) {
        m.values[t * m.n_cols + col] = static_cast<double>(edges[t]);
      }
      ++col;
    }
  }

  return m;
}

}  // namespace phasedet
