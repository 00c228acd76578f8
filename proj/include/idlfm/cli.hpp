#pragma once

#include <iosfwd>

namespace idlfm {

/// Exit codes of the `idlfm` binary.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitDivergence = 3 };

/// Entry point of the `idlfm` command line (subcommands simulate, fit,
/// interpolate, tune, benchmark). Messages go to `err`; usage text to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace idlfm
