#include <iostream>

#include "csc/harness/cli.hpp"

int main(int argc, char** argv) { return csc::harness::run_cli(argc, argv, std::cout, std::cerr); }
