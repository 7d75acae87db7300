#include <iostream>

#include "fibersim/cli.hpp"

int main(int argc, char** argv) { return fibersim::Main(argc, argv, std::cout, std::cerr); }
