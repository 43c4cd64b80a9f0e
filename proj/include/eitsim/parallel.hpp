#pragma once

#include <cstddef>
#include <functional>

namespace eitsim {

/// Name of the environment variable that overrides the worker count.
inline constexpr const char* kThreadsEnv = "EITSIM_THREADS";

/// `requested` if positive, else the environment override, else the
/// hardware concurrency (at least 1).
int resolve_threads(int requested = 0);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index
/// runs exactly once; the first exception thrown by any task is rethrown
/// after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace eitsim
