#include <iostream>
#include <string>
#include <vector>

#include "clef/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return clef::cli::cli_main(args, std::cout, std::cerr);
}
