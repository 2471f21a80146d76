#pragma once

#include <iosfwd>

namespace scribprop {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitInfeasible = 3,
};

/// Runs `scribprop <subcommand> ...`. Logs go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scribprop
