#pragma once

#include <cstddef>
#include <functional>

namespace deadnet {

/// Worker cap: DEADNET_THREADS if set, else the hardware concurrency.
std::size_t thread_limit();
void set_thread_limit(std::size_t threads);

/// Calls fn(i) for i in [0, n) on up to thread_limit() threads. Each index is
/// handled exactly once, so results written by index are order-independent.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace deadnet
