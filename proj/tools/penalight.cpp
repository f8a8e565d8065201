#include <iostream>

#include "penalight/cli.hpp"

int main(int argc, char **argv) {
    return penalight::run_cli(argc, argv, std::cout, std::cerr);
}
