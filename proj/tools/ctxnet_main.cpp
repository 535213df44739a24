#include <string>
#include <vector>

#include "ctxnet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ctxnet::run_cli(std::move(args));
}
