#pragma once

#include <cstddef>
#include <functional>

namespace autov {

// Worker count used when a caller passes 0: the machine's hardware concurrency.
std::size_t default_thread_count();

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default). Work is
// split into contiguous index ranges; callers write results into per-index
// slots and reduce in index order, so output does not depend on the worker
// count. The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace autov
