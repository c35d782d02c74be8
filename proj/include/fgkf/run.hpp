#pragma once

#include "fgkf/config.hpp"

namespace fgkf {

// Executes one resolved command, writing artifacts into out_dir. Throws on
// failure; callers map exception categories to exit codes.
void run(const RunConfig& config);

// Full command-line entry: parse, run, report. Exit codes: 0 ok, 2 config
// error, 3 data error, 4 numeric divergence, 1 anything else.
int run_cli(int argc, char** argv);

}  // namespace fgkf
