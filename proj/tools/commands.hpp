#pragma once

#include <iosfwd>

namespace stgf::cli {

/// Parses argv and runs one subcommand. Exit codes: 0 success, 2 usage/config,
/// 3 data/format, 4 numerical/convergence, 1 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stgf::cli
