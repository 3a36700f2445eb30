#pragma once

#include <cstddef>
#include <functional>

namespace mva {

/// Worker cap: MVA_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t thread_budget();

/// Runs task(i) for i in [0, count) on up to `threads` workers. Tasks must be
/// independent. The first exception thrown by any task is rethrown after all
/// workers finish.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& task);

}  // namespace mva
