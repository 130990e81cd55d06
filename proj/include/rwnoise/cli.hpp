#pragma once

#include <iosfwd>

namespace rwnoise {

// Exit codes of the rwnoise command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;    // I/O or internal error
inline constexpr int kExitBadInput = 2;   // bad arguments, unreadable or invalid inputs
inline constexpr int kExitSolver = 3;     // linear solver did not converge

/// Runs the `rwnoise` command line: segment, bench-spiral, eval, serve.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rwnoise
