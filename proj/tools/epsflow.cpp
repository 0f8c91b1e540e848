#include "epsflow/cli.hpp"

int main(int argc, char** argv) { return epsflow::cli::main(argc, argv); }
