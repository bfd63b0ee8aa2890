#include "echostrain/cli.hpp"

int main(int argc, char** argv) { return echostrain::cli::run(argc, argv); }
