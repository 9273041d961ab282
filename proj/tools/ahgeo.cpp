#include "ahgeo/cli.hpp"

int main(int argc, char** argv) { return ahgeo::cli::main_entry(argc, argv); }
