#include <string>
#include <vector>

#include "prevmap/cli.hpp"

int main(int argc, char** argv) {
  return prevmap::run(std::vector<std::string>(argv + 1, argv + argc));
}
