#include "hilltop/cli.hpp"

int main(int argc, char** argv) { return hilltop::cli::run(argc, argv); }
