#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phasedet/phase.hpp"

namespace phasedet {

inline constexpr int kNumBinary = 12;
inline constexpr int kNumAnalog = 4;

// One second of synchronized sensor readings.
struct SignalFrame {
  int t = 0;
  std::array<std::uint8_t, kNumBinary> binary{};
  std::array<double, kNumAnalog> analog{};
};

// A complete surgery sampled at 1 Hz. When labels are present they run
// parallel to frames and use 0-based phase indices.
struct SurgeryRecording {
  std::string id;
  std::vector<SignalFrame> frames;
  std::vector<int> labels;

  bool labeled() const { return !labels.empty(); }
  std::size_t size() const { return frames.size(); }
};

struct LoadOptions {
  // Strict mode rejects non-monotone label sequences; lenient mode keeps them
  // and reports each violation as a warning.
  bool strict = true;
};

// Parses the recording CSV format: header `t,b01..b12,a01..a04,phase`, one
// row per second, timestamps increasing by exactly 1. The recording id is the
// file stem. Throws DataError on malformed input.
SurgeryRecording load_recording(const std::filesystem::path& path, const LoadOptions& opts = {},
                                std::vector<std::string>* warnings = nullptr);

// Same parser on in-memory text; id supplied by the caller.
SurgeryRecording parse_recording_csv(const std::string& text, const std::string& id,
                                     const LoadOptions& opts = {},
                                     std::vector<std::string>* warnings = nullptr);

std::string recording_to_csv(const SurgeryRecording& rec);
void save_recording(const SurgeryRecording& rec, const std::filesystem::path& path);

// Loads every *.csv in dir, sorted by filename. Throws DataError when the
// directory is missing or contains no recordings.
std::vector<SurgeryRecording> load_dataset(const std::filesystem::path& dir,
                                           const LoadOptions& opts = {});

}  // namespace phasedet
