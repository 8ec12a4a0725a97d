#include <iostream>
#include <string>
#include <vector>

#include "tvmsm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tvmsm::run_cli(args, std::cout, std::cerr);
}
