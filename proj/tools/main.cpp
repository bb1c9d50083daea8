#include <iostream>
#include <string>
#include <vector>

#include "ctcalign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ctcalign::run_cli(args, std::cout, std::cerr);
}
