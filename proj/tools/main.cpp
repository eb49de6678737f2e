#include "olcsim/cli.hpp"

int main(int argc, char** argv) { return olcsim::run_cli(argc, argv); }
