#include <iostream>

#include "dipsent/cli.hpp"

int main(int argc, char** argv) { return dipsent::run_cli(argc, argv, std::cout, std::cerr); }
