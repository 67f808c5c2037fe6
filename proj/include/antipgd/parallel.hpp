#ifndef ANTIPGD_PARALLEL_HPP
#define ANTIPGD_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace antipgd {

/// Explicit value, else ANTIPGD_WORKERS, else the hardware thread count (at least 1).
inline unsigned resolve_workers(std::optional<unsigned> requested) {
    if (requested && *requested > 0) {
        return *requested;
    }
    if (const char* env = std::getenv("ANTIPGD_WORKERS")) {
        try {
            const long n = std::stol(env);
            if (n > 0) {
                return static_cast<unsigned>(n);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

/**
 * Calls fn(i) for i in [0, n) on up to `workers` threads, handing out indices
 * from a shared counter. The first exception thrown by any task is rethrown
 * after all threads have joined; remaining tasks are skipped.
 */
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n || failed.load()) {
                        return;
                    }
                    try {
                        fn(i);
                    } catch (...) {
                        const std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                        failed.store(true);
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace antipgd

#endif  // ANTIPGD_PARALLEL_HPP
