#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctcalign {

enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitInfeasible = 2 };

/// Entry point of the `ctc-align` tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctcalign
