#include "ehwf/cli.hpp"

int main(int argc, char** argv) { return ehwf::cli_main(argc, argv); }
