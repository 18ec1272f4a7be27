#include "cdil/cli.hpp"

int main(int argc, char** argv) { return cdil::run_cli(argc, argv); }
