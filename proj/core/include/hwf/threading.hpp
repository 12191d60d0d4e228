#pragma once

#include <cstdint>
#include <functional>

namespace hwf {

// Global worker count for parallel_for. 1 (the default) runs everything
// inline on the calling thread.
int thread_count();
void set_thread_count(int n);

// Splits [0, n) into contiguous chunks, one per worker. Results are bitwise
// independent of the worker count as long as the body writes only to its own
// index range, which is how every kernel in this project uses it.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body);

}  // namespace hwf
