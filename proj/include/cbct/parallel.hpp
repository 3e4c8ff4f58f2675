#pragma once

#include <cstddef>
#include <functional>

namespace cbct {

/// Number of worker threads to use; 0 means "all hardware threads".
unsigned resolve_threads(unsigned requested);

/// Splits [0, count) into contiguous chunks, one per worker, and calls
/// body(begin, end) for each. Every index is visited by exactly one call, so
/// kernels that write disjoint outputs per index stay deterministic no matter
/// how many workers run. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace cbct
