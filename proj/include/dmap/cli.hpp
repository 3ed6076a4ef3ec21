#pragma once

#include <string>
#include <vector>

namespace dmap {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

/// Runs the `dmap` command line; args[0] is the program name. Failures are
/// reported on stderr as one JSON object and mapped to the exit codes above.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace dmap
