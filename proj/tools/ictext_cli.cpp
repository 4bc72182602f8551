#include <iostream>

#include "ictext/cli.hpp"

int main(int argc, char** argv) { return ictext::run_cli(argc, argv, std::cout, std::cerr); }
