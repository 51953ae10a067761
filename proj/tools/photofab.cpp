#include <iostream>

#include "photofab/cli.hpp"

int main(int argc, char** argv) {
  return photofab::cli::run(argc, argv, std::cout, std::cerr);
}
