#include "nhms/cli.hpp"

int main(int argc, char** argv) { return nhms::cli::run_command(argc, argv); }
