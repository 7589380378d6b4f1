#pragma once

#include <cstddef>
#include <functional>

namespace sigdistill {

// Worker cap: SIGDISTILL_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index runs exactly once; callers reduce
// results in index order themselves. The first exception thrown by any task
// is rethrown on the calling thread after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sigdistill
