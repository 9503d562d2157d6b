#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dcflow {

/// Process-wide worker count used by parallel_for. 1 means run inline.
inline unsigned& worker_threads()
{
    static unsigned n = 1;
    return n;
}

inline void set_worker_threads(unsigned n) { worker_threads() = std::max(1u, n); }

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs;
/// results are then independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body)
{
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace dcflow
