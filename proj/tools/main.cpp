#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return bimsgc::cli_main(argc, argv, std::cout, std::cerr); }
