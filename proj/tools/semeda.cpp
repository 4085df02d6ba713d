#include <iostream>
#include <string>
#include <vector>

#include "semeda/cli.hpp"
#include "semeda/parallel.hpp"

int main(int argc, char** argv) {
  semeda::tune_allocator();
  return semeda::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
