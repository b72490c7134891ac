#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace frontpage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand. `args` excludes the program name. Failures are written
// to `err` as a single JSON record {"error": <code>, "message": <text>}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace frontpage::cli
