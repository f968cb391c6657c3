#include "cli/run.hpp"

int main(int argc, char** argv) { return optotrap::cli::run_main(argc, argv); }
