#include "seqdml/cli.hpp"

int main(int argc, char** argv) { return seqdml::run_cli(argc, argv); }
