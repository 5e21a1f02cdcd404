#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clef::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `clef` tool. `args` excludes the program name. Results
/// go to `out` (or --out files), logs to stderr.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clef::cli
