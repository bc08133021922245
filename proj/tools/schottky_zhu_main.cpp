#include "szhu/cli.hpp"

int main(int argc, char** argv) { return szhu::cli::run(argc, argv); }
