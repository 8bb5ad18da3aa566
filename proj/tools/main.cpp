#include <iostream>

#include "scsco/cli.hpp"

int main(int argc, char** argv) { return scsco::run_cli(argc, argv, std::cout, std::cerr); }
