#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace angio {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_numerical = 2, exit_verification = 3 };

/// Runs `angio <subcommand> [flags]`; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace angio
