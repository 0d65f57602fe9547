#include "rsiam/commands.hpp"

int main(int argc, char** argv) { return rsiam::run_cli(argc, argv); }
