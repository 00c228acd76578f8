#include "idlfm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return idlfm::run_cli(argc, argv, std::cout, std::cerr);
}
