#include <iostream>
#include <string>
#include <vector>

#include "busroute/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return busroute::cli::run(std::move(args), std::cout, std::cerr);
}
