#include <iostream>

#include "slicing/cli/cli.hpp"

int main(int argc, char** argv) { return slicing::cli::run(argc, argv, std::cout, std::cerr); }
