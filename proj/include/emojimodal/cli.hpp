#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emojimodal::cli {

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on a usage error and 2 on a data or model error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads EMOJIMODAL_LOG (trace|debug|info|warn|error|off) and sends log
// output to stderr.
void configure_logging();

}  // namespace emojimodal::cli
