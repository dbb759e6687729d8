#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return cipher_icl::cli::run(argc, argv, std::cout, std::cerr);
}
