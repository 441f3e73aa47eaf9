#include <iostream>

#include "lfcons/cli.hpp"

int main(int argc, char** argv) { return lfcons::cli::run(argc, argv, std::cout, std::cerr); }
