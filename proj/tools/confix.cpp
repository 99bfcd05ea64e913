#include <iostream>

#include "confix/commands.hpp"

int main(int argc, char** argv) { return confix::run_cli(argc, argv, std::cout, std::cerr); }
