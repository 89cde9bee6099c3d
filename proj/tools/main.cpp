#include "survexplain/cli_run.hpp"

int main(int argc, char** argv) { return survexplain::run_cli(argc, argv); }
