#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace air::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInputFormat = 2,
    kDimensionMismatch = 3,
    kInternal = 4,
};

// Parses argv and runs one subcommand. Diagnostics go to `err`, one line
// per failure; normal output to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace air::cli
