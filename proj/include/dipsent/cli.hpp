#pragma once

#include <ostream>

namespace dipsent {

/// Entry point of the `dipsent` tool. Returns 0 on success, 1 when input
/// data or individual items fail, 2 on usage or configuration errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dipsent
