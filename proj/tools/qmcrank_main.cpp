#include <string>
#include <vector>

#include "qmcrank/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qmcrank::cli::run_cli(args);
}
