#include "rde/cli.hpp"

int main(int argc, char** argv) { return rde::cli::run(argc, argv); }
