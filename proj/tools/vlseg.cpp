#include <iostream>

#include "vl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vl::run(args, std::cout, std::cerr);
}
