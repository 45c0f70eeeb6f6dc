#include <string>
#include <vector>

#include "gss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gss::cli::run(args);
}
