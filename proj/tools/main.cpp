#include "wq/cli.hpp"

int main(int argc, char** argv) { return wq::run_cli(argc, argv); }
