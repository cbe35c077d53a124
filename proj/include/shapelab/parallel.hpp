#pragma once

#include <cstddef>
#include <functional>

namespace shapelab {

/// Worker count used by parallel_for; 0 selects the hardware concurrency.
void set_worker_threads(int n);
int worker_threads();

/// Calls fn(i) for i in [0, n) on the worker pool. Each index is visited
/// exactly once, so results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace shapelab
