#include <gpr/cli.hpp>

int main(int argc, char** argv) { return gpr::cli_main(argc, argv); }
