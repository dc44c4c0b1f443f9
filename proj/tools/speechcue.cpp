#include "speechcue/cli.hpp"

int main(int argc, char** argv) { return speechcue::cli::run(argc, argv); }
