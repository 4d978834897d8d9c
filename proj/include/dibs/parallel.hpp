#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dibs {

// Runs fn(i) for i in [0, n) on up to n_threads workers. Work is split into
// contiguous static blocks so results written to preallocated slots are
// independent of the thread count; reductions stay with the caller in index
// order. Exceptions are captured and rethrown on the calling thread.
template <class Fn>
void parallel_for(int n, int n_threads, Fn&& fn) {
    n_threads = std::max(1, std::min(n_threads, n));
    if (n <= 0) return;
    if (n_threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::exception_ptr err;
    std::mutex err_mu;
    const int block = (n + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
        const int lo = w * block;
        const int hi = std::min(n, lo + block);
        if (lo >= hi) break;
        workers.emplace_back([&, lo, hi] {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace dibs
