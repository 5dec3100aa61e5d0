#pragma once

#include <cstddef>
#include <functional>

namespace bdsde {

/// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
/// not depend on n_workers, and every chunk writes only to its own slots, so
/// results are bit-identical for any worker count. n_workers <= 1 runs inline.
void parallel_chunks(std::size_t n, std::size_t n_workers,
                     const std::function<void(std::size_t, std::size_t)>& fn);

/// Per-index variant of parallel_chunks.
void parallel_for(std::size_t n, std::size_t n_workers,
                  const std::function<void(std::size_t)>& fn);

/// Chunk size used by parallel_chunks; reductions that want determinism
/// across worker counts accumulate per chunk and combine in chunk order.
constexpr std::size_t kParallelChunk = 4096;

} // namespace bdsde
