#pragma once

#include <ostream>

namespace pcc::tool {

/// Runs the gradient-check and oracle-equivalence groups; prints one line per
/// group and returns true when all pass.
bool run_selftest(std::ostream& out);

}  // namespace pcc::tool
