#pragma once

#include <cstddef>
#include <functional>

namespace pcc {

/// Worker count: hardware concurrency, capped by the PCC_THREADS environment variable.
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n) on up to thread_budget() threads. Work is split
/// into contiguous chunks; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pcc
