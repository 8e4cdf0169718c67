#pragma once

#include <iosfwd>

#include "tritcal/error.hpp"

namespace tritcal::cli {

// Process exit codes. Library error categories map onto the codes >= 3.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kSchema = 4,
  kInvalidParameter = 5,
  kDegenerate = 6,
  kIngestion = 7,
  kCorruptCheckpoint = 8,
  kDiverged = 9,
  kShapeMismatch = 10,
};

int exit_code_for(ErrorCategory category);

// Runs one `tritcal <subcommand> ...` invocation. Errors are reported on `err`
// as `error[<category>]: <message>`.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tritcal::cli
