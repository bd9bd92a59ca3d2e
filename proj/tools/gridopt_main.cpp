#include "gridopt/cli.hpp"

int main(int argc, char** argv) { return gridopt::cli::main(argc, argv); }
