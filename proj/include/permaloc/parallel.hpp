#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace permaloc {

// Process-wide worker cap, set once from the CLI --threads flag.
void set_thread_cap(int n);
int thread_cap();

// Runs fn(begin, end) over disjoint chunks of [0, n). Chunks are fixed by the
// worker count, so outputs written to preassigned slots are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace permaloc
