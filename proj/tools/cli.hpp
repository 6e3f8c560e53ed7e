#pragma once

#include <string>
#include <vector>

namespace iwn::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kBadArgs = 2,
  kIoFailure = 3,
  kDiverged = 4,
  kBadShapeOrConfig = 5,
};

/// Runs one command line (without the program name). Results go to stdout,
/// logs and diagnostics to stderr.
int run(std::vector<std::string> args);

int run(int argc, char** argv);

}  // namespace iwn::cli
