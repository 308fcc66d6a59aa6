#include <vector>

#include "spcpool/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spcpool::run_cli(args);
}
