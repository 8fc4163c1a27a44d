#include "hardneg/cli.hpp"

int main(int argc, char** argv) { return hardneg::cli::run(argc, argv); }
