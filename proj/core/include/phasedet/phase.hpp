#pragma once

#include <array>
#include <span>
#include <string_view>

namespace phasedet {

// The seven phases of a laparoscopic cholecystectomy, in workflow order.
// Phase indices are 0-based everywhere in the library; recording files store
// them 1-based.
inline constexpr int kNumPhases = 7;

const std::array<std::string_view, kNumPhases>& phase_names();

// Throws DataError for an index outside 0..6.
std::string_view phase_name(int index);

// Inverse of phase_name. Throws DataError for an unknown name.
int phase_index(std::string_view name);

bool is_valid_phase(int index);

// True when the label sequence never decreases (left-to-right workflow).
bool is_monotone(std::span<const int> labels);

}  // namespace phasedet
