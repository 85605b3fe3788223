#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nerfsteg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command. `args` excludes the program name. Returns 0 on success,
/// 1 on a module error (one-line diagnostic on `err`), 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nerfsteg::cli
