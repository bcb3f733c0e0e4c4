#pragma once

#include <cstddef>
#include <functional>

// Worker-pool helpers with a hard determinism rule: workers only write
// to disjoint, index-addressed slots, and reductions run through a fixed
// pairwise tree, so results are bit-identical for any thread count.

namespace winstat {

// Effective worker count: explicit override, else WINSTAT_THREADS, else
// hardware concurrency.
unsigned thread_count();

// Overrides the worker count for this process; 0 restores auto.
void set_thread_count(unsigned n);

// Runs body(0..n-1), partitioned across workers. body must confine its
// writes to slot i of preallocated output.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Sum with a fixed pairwise reduction tree (layout-determined order).
double tree_sum(const double* xs, std::size_t n);

}  // namespace winstat
