#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scusum::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kUsage = 2,
  kParse = 3,
  kNumeric = 4,
  kIo = 5,
};

/// Runs one `scusum` invocation. argv[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scusum::cli
