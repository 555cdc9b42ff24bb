#include "cbwk/cli.hpp"

int main(int argc, char** argv) { return cbwk::cli(argc, argv); }
