#pragma once

namespace echostrain::cli {

// Parses the command line, runs the selected subcommand, and maps typed
// errors onto the documented process exit codes: 0 success, 1 internal,
// 2 validation, 3 I/O, 4 format, 5 stale artifact. Never throws.
int run(int argc, const char* const* argv);

}  // namespace echostrain::cli
