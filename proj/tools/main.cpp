#include <unistd.h>

#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  zsner::cli::Environment env;
  env.interactive = isatty(STDIN_FILENO) != 0;
  return zsner::cli::run(std::vector<std::string>(argv + 1, argv + argc), env);
}
