#pragma once

#include <ostream>

namespace ratlim::cli {

// Exit codes: 0 success, 2 validation error, 3 convergence failure, 1 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ratlim::cli
