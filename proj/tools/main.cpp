#include <iostream>
#include <vector>

#include "rdsat/cli.hpp"

int main(int argc, char** argv) {
  return rdsat::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
