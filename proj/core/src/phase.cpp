#include "phasedet/phase.hpp"

#include <string>

#include "phasedet/error.hpp"

namespace phasedet {

const std::array<std::string_view, kNumPhases>& phase_names() {
  static const std::array<std::string_view, kNumPhases> names = {
      "Trocar placement",      "Preparation", "Clipping", "Detaching gallbladder",
      "Retrieving gallbladder", "Hemostasis",  "Closing",
  };
  return names;
}

std::string_view phase_name(int index) {
  if (!is_valid_phase(index)) {
    throw DataError("phase index out of range: " + std::to_string(index));
  }
  return phase_names()[static_cast<std::size_t>(index)];
}

int phase_index(std::string_view name) {
  const auto& names = phase_names();
  for (int i = 0; i < kNumPhases; ++i) {
    if (names[static_cast<std::size_t>(i)] == name) return i;
  }
  throw DataError("unknown phase name: " + std::string(name));
}

bool is_valid_phase(int index) { return index >= 0 && index < kNumPhases; }

bool is_monotone(std::span<const int> labels) {
  for (std::size_t t = 1; t < labels.size(); ++t) {
    if (labels[t] < labels[t - 1]) return false;
  }
  return true;
}

}  // namespace phasedet
