#include <CLI11.hpp>

#include "scexp/cli.hpp"

int main(int argc, char** argv) { return scexp::cli::run_cli(argc, argv); }
