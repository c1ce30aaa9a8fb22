#include "cli.hpp"

int main(int argc, char** argv) { return phasedet::cli::run_command(argc, argv); }
