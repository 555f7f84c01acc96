#include <iostream>

#include "qseg/cli.hpp"

int main(int argc, char** argv) {
  return qseg::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
