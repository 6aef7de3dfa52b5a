#pragma once

// Command line front end.  run() is the in-process entry point shared by the
// binary and the tests: it parses the argument vector, reads the sectioned
// key=value config, executes one subcommand, and returns the process exit
// code (0 success / failed checks print and return 1, 2 parse error,
// 3 solver budget exhausted, 4 precondition violated).

#include <iosfwd>
#include <string>
#include <vector>

namespace rdsat::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rdsat::cli
