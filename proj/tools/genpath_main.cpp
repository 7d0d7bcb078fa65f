#include "genpath/cli_io.hpp"

int main(int argc, char** argv) { return genpath::run_cli(argc, argv); }
