#pragma once

#include <cstddef>
#include <functional>

namespace lamo {

// Worker count: LAMO_THREADS env var if set, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Tasks must write disjoint state; results are
// then identical for any worker count. Falls back to a plain loop when n or
// the worker count is 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lamo
