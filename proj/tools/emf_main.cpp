#include "emf/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return emf::cli::dispatch(argc, argv, std::cout, std::cerr); }
