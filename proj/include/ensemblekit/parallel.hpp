#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ensemblekit {

inline std::atomic<int>& worker_count_ref() {
    static std::atomic<int> count{0}; // 0 = use hardware concurrency
    return count;
}

inline void set_worker_count(int n) { worker_count_ref().store(n); }

inline int effective_workers() {
    int n = worker_count_ref().load();
    if (n <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return n;
}

// Runs fn(i) for i in [0, n). Tasks write into caller-owned index slots, so
// results do not depend on scheduling. The first exception is rethrown after
// all threads join.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int workers = effective_workers();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const std::size_t nthreads =
        std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> threads;
    threads.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) threads.emplace_back(body);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace ensemblekit
