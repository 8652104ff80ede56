#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime failure reported
// as a single "kind: message" line on err, 2 configuration or usage failure.

#include <ostream>
#include <string>
#include <vector>

namespace svl {

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svl
