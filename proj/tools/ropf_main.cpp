#include <iostream>

#include "ropf/cli.hpp"

int main(int argc, char** argv) {
  return ropf::cli::run(argc, argv, std::cout, std::cerr);
}
