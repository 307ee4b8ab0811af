#include <iostream>

#include "sdot/cli.hpp"

int main(int argc, char** argv) { return sdot::run_cli(argc, argv, std::cout, std::cerr); }
