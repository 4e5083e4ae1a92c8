#include "graphdistill/experiments.hpp"

int main(int argc, char** argv) { return gd::experiments::run_cli(argc, argv); }
