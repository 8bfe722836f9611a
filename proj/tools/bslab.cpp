#include "bslab/cli.hpp"

int main(int argc, char** argv) { return bslab::cli::main(argc, argv); }
