#include "phasedet/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <string_view>

#include "phasedet/error.hpp"
#include "phasedet/io.hpp"
#include "phasedet/rng.hpp"

namespace phasedet {

namespace {

constexpr std::uint64_t kSurgeryStream = 31;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<double> parse_values(std::string_view value, std::size_t expected,
                                 const std::string& key) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t pos = value.find(',', start);
    if (pos == std::string_view::npos) pos = value.size();
    const std::string_view field = trim(value.substr(start, pos - start));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw DataError("synth config: bad number '" + std::string(field) + "' for key " + key);
    }
    out.push_back(v);
    start = pos + 1;
    if (pos == value.size()) break;
  }
  if (out.size() != expected) {
    throw DataError("synth config: key " + key + " expects " + std::to_string(expected) +
                    " value(s), got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace

SynthConfig SynthConfig::clean_default() {
  SynthConfig c;
  // Distinct 0/1 instrument patterns and analog levels at least six standard
  // deviations apart, with fixed per-phase durations.
  const std::array<std::array<double, kNumBinary>, kNumPhases> patterns = {{
      {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1},
      {0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1},
      {0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 1},
      {0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 1},
      {0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 1},
      {0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 1, 0},
      {0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0},
  }};
  const std::array<int, kNumPhases> durations = {80, 120, 40, 150, 70, 90, 60};
  for (int p = 0; p < kNumPhases; ++p) {
    auto& profile = c.phases[static_cast<std::size_t>(p)];
    profile.duration_min = durations[static_cast<std::size_t>(p)];
    profile.duration_max = durations[static_cast<std::size_t>(p)];
    profile.on_prob = patterns[static_cast<std::size_t>(p)];
    profile.analog_mean = {10.0 * (p + 1), 5.0 * (kNumPhases - p), 3.0 * p, 0.0};
    profile.analog_std = {1.0, 1.0, 1.0, 1.0};
  }
  return c;
}

SynthConfig SynthConfig::noisy_default() {
  SynthConfig c;
  // Each phase has a couple of strongly associated instruments plus shared
  // context channels (camera, insufflator); flip noise blurs single frames.
  const std::array<std::array<double, kNumBinary>, kNumPhases> on_prob = {{
      {0.90, 0.10, 0.05, 0.02, 0.05, 0.05, 0.05, 0.02, 0.05, 0.02, 0.90, 0.70},
      {0.10, 0.90, 0.60, 0.05, 0.10, 0.20, 0.10, 0.05, 0.10, 0.05, 0.95, 0.90},
      {0.05, 0.50, 0.15, 0.90, 0.55, 0.10, 0.05, 0.05, 0.10, 0.02, 0.95, 0.90},
      {0.05, 0.60, 0.10, 0.10, 0.15, 0.90, 0.60, 0.10, 0.15, 0.05, 0.95, 0.90},
      {0.05, 0.30, 0.05, 0.05, 0.10, 0.15, 0.10, 0.90, 0.55, 0.10, 0.95, 0.85},
      {0.05, 0.10, 0.10, 0.02, 0.05, 0.30, 0.25, 0.10, 0.90, 0.55, 0.90, 0.70},
      {0.10, 0.05, 0.05, 0.02, 0.02, 0.10, 0.05, 0.05, 0.15, 0.90, 0.85, 0.30},
  }};
  // Durations vary substantially between patients, so elapsed time is only a
  // rough hint at the current phase.
  const std::array<std::array<int, 2>, kNumPhases> durations = {{
      {60, 200}, {120, 400}, {20, 70}, {150, 500}, {60, 220}, {50, 250}, {50, 180},
  }};
  // a01 is a device baseline that barely moves across phases, a02 rises with
  // the procedure like accumulated irrigation weight, a03/a04 are secondary.
  const std::array<std::array<double, kNumAnalog>, kNumPhases> means = {{
      {10, 0, 0, 0},
      {12, 20, 15, 5},
      {12, 40, 25, 5},
      {12, 60, 35, 5},
      {12, 80, 10, 5},
      {11, 100, 30, 3},
      {10, 120, 5, 0},
  }};
  const std::array<std::array<double, kNumAnalog>, kNumPhases> stds = {{
      {2, 24, 12, 4},
      {2, 24, 25, 6},
      {2, 24, 25, 6},
      {2, 24, 30, 6},
      {2, 24, 20, 6},
      {2, 24, 30, 6},
      {2, 24, 12, 4},
  }};
  for (int p = 0; p < kNumPhases; ++p) {
    auto& profile = c.phases[static_cast<std::size_t>(p)];
    profile.duration_min = durations[static_cast<std::size_t>(p)][0];
    profile.duration_max = durations[static_cast<std::size_t>(p)][1];
    profile.on_prob = on_prob[static_cast<std::size_t>(p)];
    profile.analog_mean = means[static_cast<std::size_t>(p)];
    profile.analog_std = stds[static_cast<std::size_t>(p)];
  }
  c.flip_noise = 0.3;
  c.analog_noise = 2.0;
  c.clipping_skip_prob = 0.15;
  return c;
}

SynthConfig SynthConfig::noisy_variant() {
  const SynthConfig base = noisy_default();
  SynthConfig c = base;
  // A different rhythm as well: long exploration and retrieval, quick
  // dissection.
  const std::array<std::array<int, 2>, kNumPhases> durations = {{
      {150, 400}, {60, 180}, {20, 70}, {80, 250}, {120, 400}, {100, 350}, {40, 120},
  }};
  for (int p = 0; p < kNumPhases; ++p) {
    c.phases[static_cast<std::size_t>(p)].duration_min = durations[static_cast<std::size_t>(p)][0];
    c.phases[static_cast<std::size_t>(p)].duration_max = durations[static_cast<std::size_t>(p)][1];
  }
  for (int p = 0; p < kNumPhases - 2; ++p) {
    auto& profile = c.phases[static_cast<std::size_t>(p)];
    // This practice reaches for each instrument roughly one phase earlier
    // and works at a higher device baseline.
    const auto& habit = base.phases[static_cast<std::size_t>(p + 1)];
    profile.on_prob = habit.on_prob;
    profile.analog_mean = habit.analog_mean;
    profile.analog_std = habit.analog_std;
    profile.analog_mean[0] = base.phases[static_cast<std::size_t>(p)].analog_mean[0] + 20.0;
  }
  // The endgame differs outright: hemostasis by irrigation and suction
  // rather than cautery, then everything switched off for wound dressing.
  auto& hemostasis = c.phases[kNumPhases - 2];
  hemostasis.on_prob = {0.05, 0.10, 0.05, 0.02, 0.05, 0.10, 0.85, 0.10, 0.35, 0.10, 0.90, 0.60};
  hemostasis.analog_mean = {base.phases[kNumPhases - 2].analog_mean[0] + 20.0, 120, 35, 6};
  hemostasis.analog_std = {2, 24, 25, 6};
  auto& closing = c.phases[kNumPhases - 1];
  closing.on_prob = {0.05, 0.05, 0.05, 0.02, 0.02, 0.05, 0.02, 0.02, 0.05, 0.30, 0.60, 0.15};
  closing.analog_mean = {base.phases[kNumPhases - 1].analog_mean[0] + 20.0, 140, 5, 0};
  closing.analog_std = {2, 24, 12, 4};
  return c;
}

void validate(const SynthConfig& config) {
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& profile = config.phases[static_cast<std::size_t>(p)];
    if (profile.duration_min < 1 || profile.duration_min > profile.duration_max) {
      throw DataError("synth config: phase" + std::to_string(p) +
                      " duration bounds must satisfy 1 <= min <= max");
    }
    for (const double q : profile.on_prob) {
      if (!(q >= 0.0 && q <= 1.0)) {
        throw DataError("synth config: phase" + std::to_string(p) +
                        " binary probability out of [0,1]");
      }
    }
    for (const double s : profile.analog_std) {
      if (!(s >= 0.0)) {
        throw DataError("synth config: phase" + std::to_string(p) + " negative analog stddev");
      }
    }
  }
  if (!(config.flip_noise >= 0.0 && config.flip_noise < 0.5)) {
    throw DataError("synth config: flip_noise must be in [0, 0.5)");
  }
  if (!(config.analog_noise >= 0.0)) {
    throw DataError("synth config: analog_noise must be >= 0");
  }
  if (!(config.clipping_skip_prob >= 0.0 && config.clipping_skip_prob < 1.0)) {
    throw DataError("synth config: clipping_skip_prob must be in [0, 1)");
  }
}

SynthConfig parse_synth_config(const std::string& text, const SynthConfig& base) {
  SynthConfig config = base;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError("synth config: line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));

    if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_values(value, 1, key)[0]);
    } else if (key == "flip_noise") {
      config.flip_noise = parse_values(value, 1, key)[0];
    } else if (key == "analog_noise") {
      config.analog_noise = parse_values(value, 1, key)[0];
    } else if (key == "clipping_skip_prob") {
      config.clipping_skip_prob = parse_values(value, 1, key)[0];
    } else if (key.rfind("phase", 0) == 0) {
      const std::size_t dot = key.find('.');
      if (dot == std::string::npos) {
        throw DataError("synth config: unknown key '" + key + "'");
      }
      int p = -1;
      const std::string_view num = std::string_view(key).substr(5, dot - 5);
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), p);
      if (ec != std::errc() || ptr != num.data() + num.size() || p < 0 || p >= kNumPhases) {
        throw DataError("synth config: bad phase index in key '" + key + "'");
      }
      auto& profile = config.phases[static_cast<std::size_t>(p)];
      const std::string field = key.substr(dot + 1);
      if (field == "duration") {
        const auto v = parse_values(value, 2, key);
        profile.duration_min = static_cast<int>(v[0]);
        profile.duration_max = static_cast<int>(v[1]);
      } else if (field == "binary") {
        const auto v = parse_values(value, kNumBinary, key);
        std::copy(v.begin(), v.end(), profile.on_prob.begin());
      } else if (field == "analog_mean") {
        const auto v = parse_values(value, kNumAnalog, key);
        std::copy(v.begin(), v.end(), profile.analog_mean.begin());
      } else if (field == "analog_std") {
        const auto v = parse_values(value, kNumAnalog, key);
        std::copy(v.begin(), v.end(), profile.analog_std.begin());
      } else {
        throw DataError("synth config: unknown key '" + key + "'");
      }
    } else {
      throw DataError("synth config: unknown key '" + key + "'");
    }
  }
  validate(config);
  return config;
}

SynthConfig load_synth_config(const std::filesystem::path& path, const SynthConfig& base) {
  return parse_synth_config(read_file(path), base);
}

std::string synth_config_to_text(const SynthConfig& config) {
  std::string out;
  auto line = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out.push_back('\n');
  };
  auto join = [](const auto& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) s.push_back(',');
      s += format_double(static_cast<double>(values[i]));
    }
    return s;
  };
  line("seed", std::to_string(config.seed));
  line("flip_noise", format_double(config.flip_noise));
  line("analog_noise", format_double(config.analog_noise));
  line("clipping_skip_prob", format_double(config.clipping_skip_prob));
  for (int p = 0; p < kNumPhases; ++p) {
    const auto& profile = config.phases[static_cast<std::size_t>(p)];
    const std::string prefix = "phase" + std::to_string(p);
    line(prefix + ".duration",
         std::to_string(profile.duration_min) + "," + std::to_string(profile.duration_max));
    line(prefix + ".binary", join(profile.on_prob));
    line(prefix + ".analog_mean", join(profile.analog_mean));
    line(prefix + ".analog_std", join(profile.analog_std));
  }
  return out;
}

void save_synth_config(const SynthConfig& config, const std::filesystem::path& path) {
  write_file_atomic(path, synth_config_to_text(config));
}

SurgeryRecording generate_surgery(const SynthConfig& config, std::uint64_t seed,
                                  const std::string& id) {
  validate(config);
  Rng rng(seed);

  SurgeryRecording rec;
  rec.id = id;
  int t = 0;
  for (int p = 0; p < kNumPhases; ++p) {
    if (p == 2 && rng.bernoulli(config.clipping_skip_prob)) continue;
    const auto& profile = config.phases[static_cast<std::size_t>(p)];
    const int duration = rng.uniform_int(profile.duration_min, profile.duration_max);
    for (int k = 0; k < duration; ++k) {
      SignalFrame frame;
      frame.t = t++;
      for (int b = 0; b < kNumBinary; ++b) {
        bool bit = rng.bernoulli(profile.on_prob[static_cast<std::size_t>(b)]);
        if (rng.bernoulli(config.flip_noise)) bit = !bit;
        frame.binary[static_cast<std::size_t>(b)] = bit ? 1 : 0;
      }
      for (int a = 0; a < kNumAnalog; ++a) {
        const auto au = static_cast<std::size_t>(a);
        frame.analog[au] = rng.normal(profile.analog_mean[au], profile.analog_std[au]) +
                           rng.normal(0.0, config.analog_noise);
      }
      rec.frames.push_back(frame);
      rec.labels.push_back(p);
    }
  }
  return rec;
}

std::vector<SurgeryRecording> generate_dataset(const SynthConfig& config, int n,
                                               std::uint64_t seed) {
  if (n < 1) throw DataError("generate_dataset: n must be >= 1");
  std::vector<SurgeryRecording> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%03d", i + 1);
    out.push_back(generate_surgery(config, derive_seed(seed, kSurgeryStream,
                                                       static_cast<std::uint64_t>(i)),
                                   id));
  }
  return out;
}

}  // namespace phasedet
