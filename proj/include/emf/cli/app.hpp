#pragma once

#include <iosfwd>

namespace emf::cli {

/// Entry point of the `emf` tool. Returns 0 on success, 1 on user error
/// (bad flags, bad data, infeasible settings) and 2 on internal error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emf::cli
