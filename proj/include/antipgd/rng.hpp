#ifndef ANTIPGD_RNG_HPP
#define ANTIPGD_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace antipgd {

/// SplitMix64 step. Used for seeding and for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/**
 * xoshiro256++ engine with SplitMix64 seeding.
 *
 * The state is expanded from a 64-bit seed by four SplitMix64 outputs, exactly
 * as in the reference code at https://prng.di.unimi.it/. Any reimplementation
 * that follows that reference reproduces the same stream.
 *
 * Distributions are fixed here rather than taken from <random> so that streams
 * are identical across standard libraries:
 *  - uniform01: top 53 bits of one draw, scaled to [0, 1).
 *  - sign: top bit of one draw (1 -> +1, 0 -> -1).
 *  - standard_normal: Marsaglia polar method on 2*uniform01-1 pairs; the
 *    second variate of each accepted pair is cached and returned next.
 */
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    constexpr explicit Xoshiro256pp(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            word = splitmix64(x);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    constexpr result_type operator()() { return next_u64(); }

    constexpr std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    constexpr double uniform01() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    constexpr double sign() { return (next_u64() >> 63) != 0 ? 1.0 : -1.0; }

    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double x = 0.0;
        double y = 0.0;
        double s = 0.0;
        do {
            x = 2.0 * uniform01() - 1.0;
            y = 2.0 * uniform01() - 1.0;
            s = x * x + y * y;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = y * factor;
        has_spare_ = true;
        return x * factor;
    }

    /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) {
            return 0;
        }
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            __extension__ using u128 = unsigned __int128;
            const u128 m = static_cast<u128>(r) * bound;
            if (static_cast<std::uint64_t>(m) >= threshold) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

    const std::array<std::uint64_t, 4>& state() const { return state_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// FNV-1a over raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xCBF29CE484222325ULL) {
    for (const char c : bytes) {
        hash ^= static_cast<std::uint8_t>(c);
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

/**
 * Seed for an independent sub-stream.
 *
 * run_seed = base_seed XOR mix(FNV-1a(name) folded with the 8 little-endian
 * bytes of index), where mix is one SplitMix64 finalisation.
 */
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view name,
                                    std::uint64_t index) {
    std::uint64_t hash = fnv1a64(name);
    for (int byte = 0; byte < 8; ++byte) {
        hash ^= (index >> (8 * byte)) & 0xFFU;
        hash *= 0x100000001B3ULL;
    }
    std::uint64_t mixed = hash;
    return base_seed ^ splitmix64(mixed);
}

}  // namespace antipgd

#endif  // ANTIPGD_RNG_HPP
