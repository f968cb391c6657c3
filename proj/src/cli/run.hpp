#pragma once

#include <string>
#include <vector>

namespace optotrap::cli {

// Full command-line entry point. Returns the process exit code:
// 0 success, 1 invalid configuration, 2 numerical failure,
// 3 unstable-configuration refusal (override with --allow-unstable).
int run_main(int argc, char** argv);

// Same dispatcher on an argument vector (excluding argv[0]); used by tests.
int run_command(const std::vector<std::string>& args);

}  // namespace optotrap::cli
