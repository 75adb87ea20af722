#include <iostream>
#include <string>
#include <vector>

#include "aigt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return aigt::cli::run(args, std::cout, std::cerr);
}
