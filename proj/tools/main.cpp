#include "phydra/cli.hpp"

int main(int argc, char** argv) { return phydra::run_cli(argc, argv); }
