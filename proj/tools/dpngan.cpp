#include <iostream>

#include "dpngan/cli.hpp"

int main(int argc, char** argv) { return dpngan::run_cli(argc, argv, std::cout, std::cerr); }
