#include "hbre/cli.hpp"

int main(int argc, char** argv) { return hbre::run_cli(argc, argv); }
