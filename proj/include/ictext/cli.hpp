#pragma once

#include <iosfwd>

namespace ictext {

/// Entry point of the `ictext` command-line tool. Returns the process exit
/// code: 0 on success, 1 on data or validation errors, 2 on argument errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ictext
