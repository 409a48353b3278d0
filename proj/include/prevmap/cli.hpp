#pragma once

// Subcommand front-end. run() returns the process exit code: 0 on success,
// 1 on a usage error, 2 on a data or I/O error.

#include <string>
#include <vector>

namespace prevmap {

int run(const std::vector<std::string>& args);

}  // namespace prevmap
