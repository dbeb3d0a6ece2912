#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vl {

/// Runs one subcommand; `args` excludes the program name. Results go to
/// `out` (or a --report file), progress and diagnostics to `err`.
/// Returns 0 on success, 1 on a usage error, 2 on a runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vl
