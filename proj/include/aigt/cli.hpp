#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aigt::cli {

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on a validation error and 2 when endpoint retries ran out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aigt::cli
