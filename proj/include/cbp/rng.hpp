#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cbp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// murmur3 finalizer, used to spread stream indices before seeding
inline std::uint64_t fmix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xFF51AFD7ED558CCDull;
    x ^= x >> 33;
    x *= 0xC4CEB9FE1A85EC53ull;
    x ^= x >> 33;
    return x;
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

/// Deterministic random stream (xoshiro256++ core, splitmix64 seeding).
///
/// Identical (seed, call sequence) yields identical output. Substreams for
/// parallel paths are derived from a master seed and a stream index and do
/// not overlap in any practical sense. No global state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = detail::splitmix64(sm);
    }

    /// Substream `stream_id` of the generator family keyed by `master`.
    static RngStream derive(std::uint64_t master, std::uint64_t stream_id) {
        return RngStream(master ^ detail::fmix64(stream_id + 0x51ED2701A9B3C42Full));
    }

    /// Child stream consuming two words of this stream's output.
    RngStream split() {
        std::uint64_t a = next_u64();
        std::uint64_t b = next_u64();
        return RngStream(a ^ detail::fmix64(b));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1), safe as a log() argument.
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes exactly two words.
    double next_normal() {
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::array<std::uint64_t, 4> state_{};
};

} // namespace cbp
