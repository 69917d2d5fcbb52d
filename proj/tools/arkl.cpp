#include "arkl/cli.hpp"

int main(int argc, char** argv) { return arkl::cli_main(argc, argv); }
