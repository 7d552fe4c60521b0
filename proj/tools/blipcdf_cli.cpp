#include "cli.hpp"

int main(int argc, char** argv) { return blipcdf::cli::run(argc, argv); }
