#include <iostream>
#include <string>
#include <vector>

#include "memotr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return memotr::cli::run(args, std::cout, std::cerr);
}
