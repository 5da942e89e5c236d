#include <iostream>

#include "spm/cli.hpp"

int main(int argc, char** argv) { return spm::run_cli(argc, argv, std::cout, std::cerr); }
