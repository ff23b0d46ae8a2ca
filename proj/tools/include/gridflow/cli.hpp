#pragma once

#include <iosfwd>

namespace gridflow {

/// Runs the `gridflow` command line. Returns 0 on success, 1 on a domain
/// error and 2 on a usage error.
int cli_main(int argc, char const* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridflow
