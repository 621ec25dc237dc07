#pragma once

namespace phydra {

// Entry point for the command-line tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace phydra
