#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace ghs {

// Splits [0, n) into contiguous chunks, one per worker. Chunk boundaries
// depend only on n and n_threads, so per-chunk results can be merged in a
// fixed order regardless of scheduling.
inline void parallel_for(int n, int n_threads,
                         const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    if (n_threads <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    int workers = std::min(n_threads, n);
    int chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
        int lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ghs
