#include <iostream>

#include "teleop/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return teleop::run_cli(args, std::cout, std::cerr);
}
