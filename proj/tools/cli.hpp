#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dynopt::cli {

enum ExitCode : int {
    kSuccess = 0,
    kVerificationFailed = 1,
    kDegenerate = 2,
    kSolverFailure = 3,
    kInputError = 4,
};

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// %.17g
std::string num(double v);

}  // namespace dynopt::cli
