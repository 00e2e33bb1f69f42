#include "roar/cli/commands.hpp"

int main(int argc, char** argv) { return roar::cli::run(argc, argv); }
