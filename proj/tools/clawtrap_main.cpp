#include "cli.hpp"

int main(int argc, char** argv) { return clawtrap::cli::run(argc, argv); }
