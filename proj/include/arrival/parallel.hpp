#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace arrival {

/// Calls f(i) for i in [0, n) on `workers` threads. Indices are handed out
/// dynamically; callers write results by index so the outcome does not
/// depend on scheduling. The first exception thrown is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(n);
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const unsigned k = static_cast<unsigned>(std::min<std::size_t>(workers, n));
        for (unsigned w = 1; w < k; ++w) pool.emplace_back(body);
        body();
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace arrival
