#pragma once

#include <cstddef>
#include <functional>

namespace murmur {

// Worker count: hardware concurrency, capped by the MURMUR_THREADS environment
// variable when it is set to a positive integer.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous static chunks so the
// mapping from index to thread never affects results written by index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace murmur
