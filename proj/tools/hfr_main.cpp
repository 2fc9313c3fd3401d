#include <string>
#include <vector>

#include "hfr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hfr::run_cli(args);
}
