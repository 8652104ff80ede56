#pragma once

#include <cstddef>
#include <functional>

namespace svl {

// Worker cap from SVL_THREADS, else the number of logical cores.
std::size_t worker_count();

// Runs fn(0) .. fn(n-1) on up to worker_count() threads. Each index runs
// exactly once; callers write results into per-index slots. If any call
// throws, the exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace svl
