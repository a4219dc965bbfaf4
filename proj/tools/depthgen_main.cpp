#include "depthgen/cli.hpp"

int main(int argc, char** argv) { return depthgen::cli_main(argc, argv); }
