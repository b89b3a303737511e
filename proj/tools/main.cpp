#include "cli.hpp"

int main(int argc, char** argv) { return areuredi::cli::run(argc, argv); }
