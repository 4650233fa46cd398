#include "treegrad/cli.hpp"

int main(int argc, char** argv) { return treegrad::run_cli(argc, argv); }
