#pragma once

#include <cstddef>
#include <functional>

namespace fearec {

// Worker count: FEAREC_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) over at most worker_count() threads. Work items
// are claimed dynamically; callers keep results index-addressed so the
// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fearec
