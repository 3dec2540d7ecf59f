#include <iostream>

#include "trialref/cli.h"

int main(int argc, char** argv) {
  return trialref::run_cli(argc, argv, std::cout, std::cerr);
}
