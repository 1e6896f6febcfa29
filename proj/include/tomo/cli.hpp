#pragma once

#include <iosfwd>

namespace tomo {

// Full command-line entry point; parses argv, dispatches subcommands, writes
// results to `out` and diagnostics to `err`.  Returns the process exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

}  // namespace tomo
