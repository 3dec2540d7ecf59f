#pragma once

#include <iosfwd>

namespace trialref {

// Exit codes: 0 ok, 2 input error, 3 provenance mismatch, 4 internal error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trialref
