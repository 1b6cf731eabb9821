#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace teleop {

/// Exit codes: 0 success, 1 usage/config/engine error, 2 task failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitTaskFailure = 2;

/// Entry point of the `teleop` command (run, compare, analyze, serve).
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace teleop
