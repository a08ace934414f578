#include <iostream>

#include "moelab/cli.hpp"

int main(int argc, char** argv) {
    return moelab::run_cli(argc, argv, std::cout, std::cerr);
}
