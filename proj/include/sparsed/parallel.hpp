#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace sparsed {

// Runs fn(0) .. fn(n-1) on up to n_threads workers. Tasks must be independent;
// each index is handled exactly once, so results cannot depend on the worker
// count. n_threads <= 1 runs inline.
inline void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
    if (n_threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const int workers = n_threads < n ? n_threads : n;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += workers) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

}  // namespace sparsed
