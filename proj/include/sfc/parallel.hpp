#pragma once

#include <cstddef>
#include <functional>

namespace sfc {

// Global cap on worker threads (CLI --threads). 0 means hardware concurrency.
void set_thread_cap(unsigned n);
unsigned thread_cap();

// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges, one
// per worker; each index is processed by exactly one thread, so results must
// not depend on which thread ran which index. Falls back to a serial loop for
// small n or a cap of 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sfc
