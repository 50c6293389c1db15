#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qclone::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kNumerical = 3,
  kParse = 4,
  kDegenerateFit = 5,
};

/// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qclone::cli
