#pragma once

#include <ostream>

namespace herdpipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

// Parses argv, runs one subcommand and returns the process exit code.
// Summaries go to `out`; diagnostics and usage text go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace herdpipe::cli
