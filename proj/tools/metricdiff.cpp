#include "metricdiff/cli.hpp"

int main(int argc, char** argv) { return metricdiff::cli::run_command(argc, argv); }
