#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace affectlab {

// Exit codes of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// Feature matrix file: `# features v1 rows=<n> cols=<d> mode=<mode>`, then
// one line per example holding its id followed by d values.
inline constexpr const char* kFeatureFormatTag = "features v1";

// Entry point of the `affectlab` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affectlab
