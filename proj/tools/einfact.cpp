#include <iostream>
#include <string>
#include <vector>

#include "einfact/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return einfact::run_cli(args, std::cout, std::cerr);
}
