#include <iostream>
#include <string>
#include <vector>

#include "affectlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return affectlab::run_cli(args, std::cout, std::cerr);
}
