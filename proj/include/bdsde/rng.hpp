#pragma once

#include <cstdint>

namespace bdsde {

/// Substream-splitting PRNG (SplitMix64 core). A stream is identified by
/// (seed, kind, index); any stream can be reconstructed from those three
/// numbers alone, so path i draws the same numbers no matter which worker
/// generates it or in which order.
class SplitStream {
public:
    enum class Kind : std::uint64_t { backward_noise = 0, forward_noise = 1, probe = 2 };

    SplitStream(std::uint64_t seed, Kind kind, std::uint64_t index);

    std::uint64_t next_u64();

    /// Uniform on (0,1]; never returns 0 so it is safe under log().
    double next_uniform();

    /// Standard normal via Box-Muller (pairs cached).
    double next_normal();

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace bdsde
