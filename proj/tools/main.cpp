#include "ratlim/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ratlim::cli::run(argc, argv, std::cout, std::cerr); }
