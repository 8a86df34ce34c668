// CLI front end; subcommands are implemented in include/xmed/cli.hpp.
#include <iostream>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::cout << "xmed: not wired up yet\n";
  return 0;
}
