#include "mflq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mflq::cli_main(argc, argv, std::cout, std::cerr); }
