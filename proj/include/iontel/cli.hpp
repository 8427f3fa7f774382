#pragma once

#include <string>
#include <vector>

namespace iontel {

// Background-subtraction share attributed to detector dark counts alone.
inline constexpr double kDetectorDarkFraction = 0.935;

// Parses and runs one command line (without the program name). Writes
// human-readable progress to stdout and, on failure, a machine-readable
// error object {code, module, message, context} to stderr. Returns the
// process exit status.
int run_cli(const std::vector<std::string>& args);

}  // namespace iontel
