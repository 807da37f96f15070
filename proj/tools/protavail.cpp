#include <iostream>

#include "protavail/cli.hpp"

int main(int argc, char** argv) { return protavail::cli::main(argc, argv, std::cout, std::cerr); }
