#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phasedet/recording.hpp"

namespace phasedet {

// Per-phase generative profile: how long the phase lasts, which binary
// channels tend to be on, and where the analog channels sit.
struct PhaseProfile {
  int duration_min = 60;
  int duration_max = 120;
  std::array<double, kNumBinary> on_prob{};
  std::array<double, kNumAnalog> analog_mean{};
  std::array<double, kNumAnalog> analog_std{};
};

struct SynthConfig {
  std::array<PhaseProfile, kNumPhases> phases{};
  double flip_noise = 0.0;          // per-frame bit flip probability, [0, 0.5)
  double analog_noise = 0.0;        // extra global Gaussian noise, stddev >= 0
  double clipping_skip_prob = 0.0;  // chance the short Clipping phase is absent
  std::uint64_t seed = 0;

  // Noiseless, fully separable profiles with fixed durations.
  static SynthConfig clean_default();
  // Overlapping profiles with flip and analog noise; phase durations vary a
  // lot and Clipping is sometimes skipped.
  static SynthConfig noisy_default();
  // A second surgical practice: same phases, different instrument habits,
  // signal baselines and pace. Mixing both presets in one dataset gives the
  // heterogeneity of real multi-patient data.
  static SynthConfig noisy_variant();
};

void validate(const SynthConfig& config);

// `key = value` text format; unknown keys are rejected. Values are scalars or
// comma-separated lists. Parsing starts from the supplied base config.
SynthConfig parse_synth_config(const std::string& text, const SynthConfig& base);
SynthConfig load_synth_config(const std::filesystem::path& path, const SynthConfig& base);
std::string synth_config_to_text(const SynthConfig& config);
void save_synth_config(const SynthConfig& config, const std::filesystem::path& path);

// One labeled surgery: phases in canonical order, durations drawn uniformly
// within bounds, Clipping skipped with the configured probability.
SurgeryRecording generate_surgery(const SynthConfig& config, std::uint64_t seed,
                                  const std::string& id = "synth");

// n surgeries with ids synth-001..synth-N and per-surgery seeds derived from
// the master seed.
std::vector<SurgeryRecording> generate_dataset(const SynthConfig& config, int n,
                                               std::uint64_t seed);

}  // namespace phasedet
