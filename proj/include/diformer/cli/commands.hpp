#pragma once

#include <iosfwd>

namespace diformer {

/// Entry point of the `diformer` tool. Subcommands: make-data, train,
/// distill, translate, score, bleu. Returns 0 on success, 2 for usage
/// errors and 1 for any other failure (message on `err`).
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace diformer
