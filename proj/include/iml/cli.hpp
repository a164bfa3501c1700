#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iml {

inline constexpr const char* kToolVersion = "iml 1.0.0";

enum ExitCode : int { kExitPass = 0, kExitValidation = 2, kExitNumerical = 3, kExitCheckFailed = 4 };

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace iml
