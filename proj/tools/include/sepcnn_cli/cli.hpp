#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sepcnn/error.hpp"

namespace sepcnn::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

/// Default exit code for a library error raised outside a specific stage.
int exit_code_for(ErrorCode code);

/// Runs one command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sepcnn::cli
