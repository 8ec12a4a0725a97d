#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tvmsm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point for `tvmsm <command> ...`; `args` excludes the program name.
// Commands: simulate, analyze, replicate, diagnose.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tvmsm
