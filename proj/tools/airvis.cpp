#include <string>
#include <vector>

#include "airvis/cli.hpp"

int main(int argc, char** argv) {
  return airvis::run_cli(std::vector<std::string>(argv, argv + argc));
}
