#include <string>
#include <vector>

#include "magsim/cli.hpp"

int main(int argc, char** argv) {
  return magsim::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
