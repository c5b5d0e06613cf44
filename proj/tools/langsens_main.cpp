#include "langsens/cli.hpp"

int main(int argc, char** argv) { return langsens::cli::main_entry(argc, argv); }
