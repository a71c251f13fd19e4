#include <iostream>

#include "synthal/cli.hpp"

int main(int argc, char** argv) { return synthal::cli(argc, argv, std::cout, std::cerr); }
