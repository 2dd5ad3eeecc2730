#include <iostream>

#include "scitag/cli.hpp"

int main(int argc, char** argv) {
  return scitag::runCli(argc, argv, std::cin, std::cout, std::cerr);
}
