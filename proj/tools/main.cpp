#include "cogen/cli/cli.hpp"

int main(int argc, char** argv) { return cogen::cli_main(argc, argv); }
