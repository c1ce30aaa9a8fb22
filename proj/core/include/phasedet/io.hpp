#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace phasedet {

// Writes content to a temporary file in the target directory and renames it
// into place, so readers never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Reads a whole file. Throws DataError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace phasedet
