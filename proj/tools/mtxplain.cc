#include <iostream>

#include "mtxplain/cli.h"

int main(int argc, char** argv) { return mtx::run_cli(argc, argv, std::cout, std::cerr); }
