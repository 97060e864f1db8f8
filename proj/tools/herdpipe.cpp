#include <iostream>

#include "herdpipe/cli/cli.hpp"

int main(int argc, char** argv) {
  return herdpipe::cli::run(argc, argv, std::cout, std::cerr);
}
