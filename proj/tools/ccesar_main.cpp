#include "ccesar/cli/workflow.hpp"

int main(int argc, char** argv) { return ccesar::run_cli(argc, argv); }
