#pragma once

#include <cstddef>
#include <functional>

namespace nvmag {

// NVMAG_THREADS caps the worker count; default is hardware concurrency.
unsigned thread_count();

// Calls fn(i) for i in [0, n); exceptions are rethrown on the caller (first index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nvmag
