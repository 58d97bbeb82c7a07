#include <iostream>
#include <string>
#include <vector>

#include "angio/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return angio::cli_main(args, std::cout, std::cerr);
}
