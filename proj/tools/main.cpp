#include "relayopt/harness.hpp"

int main(int argc, char** argv) { return relayopt::harness::run_cli(argc, argv); }
