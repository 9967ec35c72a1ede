#include <iostream>

#include "cesoforge/cli.hpp"

int main(int argc, char** argv) {
    return cesoforge::cli::run_cli(argc, argv, std::cout, std::cerr);
}
