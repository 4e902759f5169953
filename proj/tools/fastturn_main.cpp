#include "fastturn/cli/commands.hpp"

int main(int argc, char** argv) { return fastturn::cli::run_cli(argc, argv); }
