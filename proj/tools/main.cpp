#include "alphaclip/cli/run.hpp"

int main(int argc, char** argv) { return alphaclip::cli::run_main(argc, argv); }
