#pragma once

#include <iostream>

namespace xppm {

// Subcommands: train, evaluate, explain, export-tree, encode.
// Returns 0 on success, 1 on usage errors and 2 on runtime errors.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

}  // namespace xppm
