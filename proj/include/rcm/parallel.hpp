#pragma once

// Minimal index-parallel loop for embarrassingly parallel environment sweeps.
// Jobs pull indices from an atomic counter, so the assignment of index to
// thread is nondeterministic, but callers write results into per-index slots
// and reduce in index order afterward; outputs are then identical for any
// thread count. The first exception thrown by a job is captured, the pool
// drains, and the exception is rethrown on the calling thread.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rcm {

inline void run_indexed(std::int64_t n_jobs, int n_threads,
                        const std::function<void(std::int64_t)>& job) {
    if (n_jobs <= 0) return;
    int workers = n_threads;
    if (workers > n_jobs) workers = static_cast<int>(n_jobs);
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n_jobs; ++i) job(i);
        return;
    }

    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_jobs) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace rcm
