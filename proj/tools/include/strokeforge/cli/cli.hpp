#pragma once

#include <string>
#include <vector>

namespace strokeforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. args excludes the program name.
/// Returns 0 on success, 1 on usage errors and 2 on runtime failures.
int dispatch(const std::vector<std::string>& args);

}  // namespace strokeforge::cli
