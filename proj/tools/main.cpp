#include "lpscat/cli.hpp"

int main(int argc, char** argv) { return lpscat::cli::main(argc, argv); }
