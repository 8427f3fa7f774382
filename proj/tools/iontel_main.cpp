#include <string>
#include <vector>

#include "iontel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return iontel::run_cli(args);
}
