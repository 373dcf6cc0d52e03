#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mrt {

/// Exit codes: 0 success, 1 usage/schema error, 2 numeric/solver failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitSolver = 2;

/// Subcommands: info | solve | classify | evaluate | batch-test | np-test.
/// Machine output (JSON/CSV) goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mrt
