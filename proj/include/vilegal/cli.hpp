#pragma once

#include <string>
#include <vector>

namespace vilegal {

// Full command-line driver. args excludes the program name. Returns the
// process exit code: 0 on success, 1 on usage errors, 2 on data errors.
int run_cli(std::vector<std::string> args);

} // namespace vilegal
