#include "vidpipe/pipeline.hpp"

int main(int argc, char** argv) { return vidpipe::run_cli(argc, argv); }
