#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stratengine::cli {

// Runs one command line (without the program name). Returns the process
// exit code; failures print a single "error: ..." line to err.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

}  // namespace stratengine::cli
