#pragma once

#include <iosfwd>

namespace synthal {

/// Exit codes of the synthal command.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Runs one `synthal <subcommand> ...` invocation; argv[0] is the program name.
int cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace synthal
