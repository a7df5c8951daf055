#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "skeletor/error.hpp"

namespace skeletor::cli {

// Process exit status for each error category; 0 is success.
int exit_code(ErrorKind kind);

// Runs one subcommand. args excludes the program name. Failures print
// {"error": {"category": ..., "message": ...}} on err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skeletor::cli
