#include <iostream>

#include "lqgalloc/cli.hpp"

int main(int argc, char** argv) {
    return lqgalloc::run_cli(argc, argv, std::cout, std::cerr);
}
