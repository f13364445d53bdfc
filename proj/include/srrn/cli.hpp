#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace srrn::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeError = 2 };

/// Entry point of the `srrn` tool. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srrn::cli
