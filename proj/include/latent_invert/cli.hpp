#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace latent_invert {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitNumerical = 1,
    kExitUsage = 2,
};

/// Runs the command-line tool with `args` (excluding the program name).
/// Subcommands: invert, evaluate, sample, gradcheck.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace latent_invert
