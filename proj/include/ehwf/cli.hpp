#pragma once

// Command-line front end: `solve`, `experiment` and `gen`.

#include <iosfwd>
#include <string>
#include <vector>

namespace ehwf {

/// args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace ehwf
