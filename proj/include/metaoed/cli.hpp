#pragma once

#include <string>
#include <vector>

namespace metaoed::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitEstimatorFailure = 3;

// Runs the tool with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args);

// %.17g, the fixed CSV number format.
std::string format_number(double v);

}  // namespace metaoed::cli
