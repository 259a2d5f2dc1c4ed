#include "oscmac/commands.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return oscmac::cli_main(argc, argv, std::cout, std::cerr);
}
