#include "bdsde/rng.hpp"

#include <cmath>
#include <numbers>

namespace bdsde {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

SplitStream::SplitStream(std::uint64_t seed, Kind kind, std::uint64_t index) {
    const std::uint64_t domain = mix64(seed + kGolden * (static_cast<std::uint64_t>(kind) + 1));
    state_ = mix64(domain + kGolden * (index + 1));
}

std::uint64_t SplitStream::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double SplitStream::next_uniform() {
    // 53-bit mantissa, shifted to (0,1].
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double SplitStream::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

} // namespace bdsde
