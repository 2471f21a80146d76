#include "scribprop/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return scribprop::run_cli(argc, argv, std::cout, std::cerr); }
