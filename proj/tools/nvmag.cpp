#include <iostream>
#include <string>
#include <vector>

#include "nvmag/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return nvmag::cli::run(args, std::cout, std::cerr);
}
