#include "mlkpde/cli.hpp"

int main(int argc, char** argv) { return mlkpde::run_cli(argc, argv); }
