#include "tcf/cli.hpp"

int main(int argc, char** argv) { return tcf::run_cli(argc, argv); }
