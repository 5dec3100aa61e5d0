#include "bdsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bdsde {

void parallel_chunks(std::size_t n, std::size_t n_workers,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t n_chunks = (n + kParallelChunk - 1) / kParallelChunk;
    if (n_workers <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                fn(c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    const std::size_t spawn = std::min(n_workers, n_chunks);
    threads.reserve(spawn);
    for (std::size_t w = 0; w < spawn; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

void parallel_for(std::size_t n, std::size_t n_workers,
                  const std::function<void(std::size_t)>& fn) {
    parallel_chunks(n, n_workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

} // namespace bdsde
