#pragma once

#include <iosfwd>

namespace treecascade::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kInvalidConfig = 2,
  kTestFailure = 3,
};

/// Entry point of the `cascade` tool. Output files are written where the
/// flags say; anything addressed to "-" goes to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace treecascade::cli
