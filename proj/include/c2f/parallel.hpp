#pragma once

#include <cstdint>
#include <functional>

namespace c2f {

/// Number of worker threads the pool runs with. Controlled by the C2F_THREADS
/// environment variable (0 or unset = hardware concurrency). Read once.
int max_threads();

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on the pool.
/// Each index must own disjoint output, so results are bitwise identical for
/// any thread count. Runs inline when n is small, when only one thread is
/// configured, or when called from inside a pool worker.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace c2f
