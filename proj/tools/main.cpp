#include "maple/cli/cli.hpp"

int main(int argc, char** argv) { return maple::cli::run_cli(argc, argv); }
