#pragma once

#include <iosfwd>

namespace tenshape::cli {

// Parses argv, runs the subcommand and maps failures to an ExitCode.
int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tenshape::cli
