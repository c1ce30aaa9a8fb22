#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace phasedet::cli {

// Dispatches one subcommand. args excludes the program name. Returns the
// process exit status: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical/internal error.
int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

int run_command(int argc, const char* const* argv);

}  // namespace phasedet::cli
