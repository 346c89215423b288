#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fluidrecon::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 64,
  kConfig = 65,
  kIo = 66,
  kNumerical = 70,
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one command line (without the program name). Errors are reported on
/// `err` as a single "error: <category>: <message>" line.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fluidrecon::cli
