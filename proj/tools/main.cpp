#include "fgkf/run.hpp"

int main(int argc, char** argv) { return fgkf::run_cli(argc, argv); }
