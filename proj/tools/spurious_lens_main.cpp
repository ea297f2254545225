#include <iostream>
#include <string>
#include <vector>

#include "spurious_lens/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return spurious_lens::run_cli(args, std::cout, std::cerr);
}
