#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "relaylab/errors.hpp"

namespace relaylab {

/// Worker count: an explicit request wins, then RELAYLAB_THREADS, then the
/// hardware concurrency. Zero means "auto" at every level.
inline unsigned worker_count(unsigned requested = 0)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RELAYLAB_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 0) {
            throw ConfigError(std::string("RELAYLAB_THREADS must be a nonnegative integer, got '") + env + "'");
        }
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(i) for i in [0, n) on up to `workers` threads. Tasks must write
/// only to their own slot; callers merge slots in index order afterwards,
/// which keeps results independent of scheduling. The first exception thrown
/// by any task is rethrown after all workers join.
template <class Task>
void parallel_for(std::size_t n, unsigned workers, Task&& task)
{
    workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace relaylab
