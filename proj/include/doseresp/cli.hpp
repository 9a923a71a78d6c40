#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace doseresp::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitConvergence = 3,
  kExitInitialization = 4,
};

/// Runs one command. `args` excludes the program name, e.g.
/// {"sample", "--input", "data.csv", "--out-dir", "out"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace doseresp::cli
