#pragma once

#include <iosfwd>

namespace seatlab {

// Entry point of the seatlab command-line tool. Returns the process exit
// code: 0 on success, 1 on a runtime failure, 2 on a usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seatlab
