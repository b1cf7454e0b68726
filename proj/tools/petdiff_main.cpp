#include "petdiff/cli.hpp"

int main(int argc, char** argv) { return petdiff::run_cli(argc, argv); }
