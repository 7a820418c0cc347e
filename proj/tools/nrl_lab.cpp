#include "nrl/cli.hpp"

int main(int argc, char** argv) { return nrl::cli_main(argc, argv); }
