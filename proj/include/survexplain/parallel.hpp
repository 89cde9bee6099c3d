#pragma once

#include <cstddef>
#include <functional>

namespace survexplain {

// Worker-pool cap for parallel sections. Resolution order: explicit argument,
// process-wide cap, SURVEXPLAIN_THREADS, hardware concurrency.
int resolve_threads(int requested = 0);

// Process-wide cap applied when no explicit thread count is given (0 clears).
void set_thread_cap(int threads);

// Runs fn(i) for i in [0, n). Each index must write only to its own output
// slot; reductions are done by the caller in index order afterwards, so
// results are identical for any thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace survexplain
