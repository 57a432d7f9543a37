#pragma once

#include <string>
#include <vector>

namespace fitrec {

/// Runs one subcommand (gen | views | render | train | eval | retrieve |
/// report | plot). `args` excludes the program name. Returns the process
/// exit code: 0 success, 1 usage error, 2 data error. Every run prints the
/// resolved configuration and seed before doing work.
int dispatch(const std::vector<std::string>& args);

int cli_main(int argc, char** argv);

}  // namespace fitrec
