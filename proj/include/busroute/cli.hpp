#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace busroute::cli {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // dataset or domain error
constexpr int kExitUsage = 2;    // unknown flag, missing option

/// Runs one subcommand (`args` excludes the program name). Results go to
/// `--out PATH` or `out`; failures print one `error: <code>: <message>` line
/// to `err`.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace busroute::cli
