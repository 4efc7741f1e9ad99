#pragma once

#include <cstddef>
#include <functional>

namespace tbs {

// Number of logical CPUs, at least 1.
int default_workers();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Every index is
// processed exactly once; the first exception thrown by any task is rethrown
// after all threads join. Results must be written to per-index slots so the
// outcome is independent of scheduling.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace tbs
