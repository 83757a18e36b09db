#pragma once

#include <string>
#include <vector>

namespace rde::cli {

// Subcommands: run, sweep, oracle, aggregate, emit-plot-data.
// Exit codes: 0 success, 1 malformed config/usage, 2 training divergence,
// 3 I/O failure.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace rde::cli
