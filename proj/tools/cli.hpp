#pragma once

#include <iosfwd>

namespace ppgemo::cli {

// Exit status: 0 success, 1 domain or validation failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ppgemo::cli
