#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace memotr::cli {

/// Runs one command line; args[0] is the program name. Returns the exit
/// code: 0 success, 1 usage, 2 input/format, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace memotr::cli
