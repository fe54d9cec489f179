#include "sbbts/cli/commands.hpp"

int main(int argc, char** argv) { return sbbts::cli::run_cli(argc, argv); }
