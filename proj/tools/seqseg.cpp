#include <vector>
#include <string>

#include "seqseg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seqseg::cli::run(std::move(args));
}
