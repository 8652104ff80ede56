#include <iostream>

#include "svl/cli.hpp"

int main(int argc, char** argv) {
  return svl::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
