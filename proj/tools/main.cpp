#include "hardsum/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hardsum::run_cli(argc, argv, std::cout, std::cerr); }
