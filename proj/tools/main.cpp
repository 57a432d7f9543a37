#include "fitrec/cli.hpp"

int main(int argc, char** argv) { return fitrec::cli_main(argc, argv); }
