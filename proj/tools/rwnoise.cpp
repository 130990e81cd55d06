#include <iostream>

#include "rwnoise/cli.hpp"

int main(int argc, char** argv) { return rwnoise::run_cli(argc, argv, std::cout, std::cerr); }
