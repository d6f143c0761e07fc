#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace autov::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPath = 3;
inline constexpr int kExitData = 4;
inline constexpr int kExitGroupErrors = 5;

// Runs one invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace autov::cli
