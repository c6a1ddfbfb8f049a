#include <iostream>

#include "smoothout/cli.hpp"

int main(int argc, char** argv) {
  return smoothout::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
