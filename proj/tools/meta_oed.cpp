#include <string>
#include <vector>

#include "metaoed/cli.hpp"

int main(int argc, char** argv) {
  return metaoed::cli::run(std::vector<std::string>(argv, argv + argc));
}
