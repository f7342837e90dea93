#include "sdmtl/cli.hpp"

int main(int argc, char** argv) { return sdmtl::run_cli(argc, argv); }
