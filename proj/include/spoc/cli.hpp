#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "spoc/error.hpp"

namespace spoc::cli {

/// Process exit codes; each outcome maps to exactly one code.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,           // usage, schema, file and dimension errors
  kExitDegenerate = 2,      // degenerate or empty data
  kExitDiagnosisFailed = 3, // diagnose: Z-test failed
  kExitNonConvergence = 4,  // balance: iteration cap reached
  kExitDivergence = 5,      // train/ablate: non-finite loss
};

[[nodiscard]] int exit_code_for(ErrorCode code) noexcept;

/// Runs one subcommand (synth, diagnose, balance, train, evaluate, ablate).
/// `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace spoc::cli
