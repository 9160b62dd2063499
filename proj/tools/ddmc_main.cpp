#include "ddmc/cli.hpp"

int main(int argc, char** argv) { return ddmc::cli::main_entry(argc, argv); }
