#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ilse::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidArgs = 2,
  kIoError = 3,
  kNumericFailure = 4,
};

// Runs one `ilse` invocation. args excludes the program name. Results go to
// `out` (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ilse::cli
