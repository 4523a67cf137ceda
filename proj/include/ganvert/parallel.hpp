#pragma once

#include <cstddef>
#include <functional>

namespace ganvert {

// Worker cap: GANVERT_THREADS when set (minimum 1), otherwise the hardware
// concurrency.
std::size_t thread_budget();

// Runs fn(0..n-1), possibly concurrently. Callers get determinism by writing
// results into per-index slots; the schedule itself carries no information.
// The first exception thrown by any index is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ganvert
