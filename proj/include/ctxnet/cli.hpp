#pragma once

#include <string>
#include <vector>

namespace ctxnet {

// Dispatches the ctxnet subcommands. `args` excludes the program name.
// Exit status: 0 success, 1 usage error, 2 data/validation error.
int run_cli(std::vector<std::string> args);

}  // namespace ctxnet
