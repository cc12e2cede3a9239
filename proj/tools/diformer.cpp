#include <iostream>

#include "diformer/cli/commands.hpp"

int main(int argc, char** argv) { return diformer::run_command(argc, argv, std::cout, std::cerr); }
