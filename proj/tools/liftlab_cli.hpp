#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace liftlab::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,
    kDataError = 2,
    kInternalError = 3,
};

/// Runs one subcommand. `args` excludes the program name, e.g.
/// {"synth", "--trials", "20", "--out", "corpus"}.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace liftlab::cli
