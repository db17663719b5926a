#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gwtails {

/// Worker count: GWTAILS_THREADS if set to a positive integer, else the
/// hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("GWTAILS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(std::min<long>(v, 1024));
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for every i in [0, n). Work is handed out in fixed-size
/// chunks; callers write results into per-index slots, so the outcome does
/// not depend on the thread count. The first exception is rethrown.
template <class Fn>
void parallel_for(std::uint64_t n, Fn&& fn, unsigned threads = thread_count()) {
    if (n == 0) return;
    constexpr std::uint64_t kChunk = 256;
    const std::uint64_t chunks = (n + kChunk - 1) / kChunk;
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, chunks));
    if (threads <= 1) {
        for (std::uint64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= chunks || failed.load(std::memory_order_relaxed)) return;
            const std::uint64_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
            try {
                for (std::uint64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                failed = true;
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

/// Maps fn over [0, n) into a vector, one slot per index.
template <class Fn>
auto parallel_map(std::uint64_t n, Fn&& fn, unsigned threads = thread_count()) {
    using T = decltype(fn(std::uint64_t{}));
    std::vector<T> out(n);
    parallel_for(n, [&](std::uint64_t i) { out[i] = fn(i); }, threads);
    return out;
}

/// Number of indices in [0, n) with pred(i), counted exactly.
template <class Pred>
std::uint64_t parallel_count(std::uint64_t n, Pred&& pred, unsigned threads = thread_count()) {
    const auto flags = parallel_map(n, [&](std::uint64_t i) -> std::uint8_t { return pred(i) ? 1 : 0; }, threads);
    std::uint64_t c = 0;
    for (auto f : flags) c += f;
    return c;
}

}  // namespace gwtails
