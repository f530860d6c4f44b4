#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace gdiff {

// Worker cap: GESTURE_DIFF_THREADS env var, else hardware concurrency.
inline int max_worker_threads() {
    if (const char* env = std::getenv("GESTURE_DIFF_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(first, last, thread_index) over contiguous blocks of [0, n).
// The block partition depends only on (n, num_threads), so reductions that
// combine per-thread results in thread order are deterministic for a fixed
// thread count.
inline int parallel_blocks(int n, const std::function<void(int, int, int)>& fn,
                           int thread_cap = -1) {
    if (n <= 0) return 0;
    int threads = thread_cap > 0 ? thread_cap : max_worker_threads();
    threads = std::min(threads, n);
    if (threads <= 1) {
        fn(0, n, 0);
        return 1;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const int base = n / threads;
    const int extra = n % threads;
    int start = 0;
    for (int i = 0; i < threads; ++i) {
        const int len = base + (i < extra ? 1 : 0);
        pool.emplace_back(fn, start, start + len, i);
        start += len;
    }
    for (auto& th : pool) th.join();
    return threads;
}

}  // namespace gdiff
