#include "flatgcd/cli.hpp"

int main(int argc, char** argv) { return flatgcd::run_cli(argc, argv); }
