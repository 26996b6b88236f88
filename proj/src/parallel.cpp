#include "permaloc/parallel.hpp"

#include <atomic>

namespace permaloc {

namespace {
std::atomic<int> g_thread_cap{0}; // 0 = hardware concurrency
}

void set_thread_cap(int n) { g_thread_cap.store(n > 0 ? n : 0); }

int thread_cap() {
    int cap = g_thread_cap.load();
    if (cap > 0) return cap;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    int workers = std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        std::size_t b = w * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace permaloc
