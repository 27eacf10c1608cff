#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dsa {

// Runs fn(first, last, chunk_index) over fixed-size chunks of [0, n).
//
// The chunk boundaries depend only on n and chunk_size, never on the thread
// count, so callers that reduce per-chunk results in chunk order get
// identical floating-point sums for any --threads setting.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads, Fn&& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    if (threads <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            const std::size_t lo = c * chunk_size;
            const std::size_t hi = std::min(n, lo + chunk_size);
            fn(lo, hi, c);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            const std::size_t lo = c * chunk_size;
            const std::size_t hi = std::min(n, lo + chunk_size);
            try {
                fn(lo, hi, c);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(error);
}

// Convenience per-item form; item writes must be independent.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    parallel_chunks(n, 16, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace dsa
