#include <iostream>

#include "coverid/app/commands.hpp"

int main(int argc, char** argv) { return coverid::app::run_cli(argc, argv, std::cout, std::cerr); }
