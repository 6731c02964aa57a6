#include "phlin/cli_io.hpp"

int main(int argc, char** argv) { return phlin::cli_main(argc, argv); }
