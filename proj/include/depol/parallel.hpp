#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace depol {

/// Resolves a requested thread count; 0 means hardware concurrency.
[[nodiscard]] inline unsigned resolve_threads(unsigned requested) noexcept {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/**
 * Calls fn(i) for every i in [0, n) on up to @p threads workers. Work is
 * handed out by an atomic counter, so callers must write results into
 * per-index slots and reduce afterwards to stay schedule-independent.
 * The first exception thrown by any call is rethrown on the caller.
 */
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = 0) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next.store(n);
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace depol
