#pragma once

#include <string>
#include <vector>

namespace tcf {

/// Subcommands: cluster, run, bench, gen-weights. Returns 0 on success and 1
/// after printing a single-line diagnostic to stderr on any failure.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace tcf
