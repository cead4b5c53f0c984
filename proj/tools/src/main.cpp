#include <string>
#include <vector>

#include "strokeforge/cli/cli.hpp"

int main(int argc, char** argv) {
  return strokeforge::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
