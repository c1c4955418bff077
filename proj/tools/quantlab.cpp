#include "quantlab/experiments.hpp"

int main(int argc, char** argv) { return quantlab::cli::cli_run(argc, argv); }
