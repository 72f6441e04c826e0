#include <iostream>

#include "casegraph/cli/commands.hpp"

int main(int argc, char** argv) { return casegraph::cli::dispatch(argc, argv, std::cout, std::cerr); }
