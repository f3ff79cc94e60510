#include <iostream>

#include "nativeai/cli.hpp"

int main(int argc, char** argv) { return nativeai::cli::run(argc, argv, std::cout, std::cerr); }
