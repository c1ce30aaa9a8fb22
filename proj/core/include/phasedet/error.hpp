#pragma once

#include <stdexcept>
#include <string>

namespace phasedet {

// Invalid or inconsistent input: malformed files, violated preconditions,
// out-of-range parameters. Maps to exit code 2 in the CLI.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure during model fitting or inference, e.g. an observation
// sequence that has probability zero under the current model. Maps to exit
// code 3 in the CLI.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace phasedet
