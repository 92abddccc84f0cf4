#pragma once

#include <cstddef>
#include <functional>

namespace sepcnn {

/// Worker count used by kernels. 0 selects hardware concurrency; 1 runs
/// everything on the calling thread.
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Runs body(i) for i in [0, count). Iterations are split into contiguous
/// chunks; each iteration must write disjoint outputs so the result does not
/// depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace sepcnn
