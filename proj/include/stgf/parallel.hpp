#pragma once

#include <cstddef>
#include <functional>

namespace stgf {

/// Worker count: STGF_THREADS when set and positive, else hardware concurrency.
int worker_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index runs
/// exactly once; callers write results into per-index slots and reduce in order.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace stgf
