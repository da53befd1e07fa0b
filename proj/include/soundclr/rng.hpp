#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace soundclr {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

// xoshiro256**: fixed algorithm so seeded draws are bit-identical across
// platforms. Every stream in the project is derived from (seed, path...) so
// resuming a run never needs mid-stream generator state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = detail::splitmix64(x);
    }

    // Independent substream addressed by a path of integers, e.g.
    // derive(seed, {kAugment, epoch, sample_index}).
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t x = seed;
        std::uint64_t h = detail::splitmix64(x);
        for (std::uint64_t p : path) {
            x = h ^ (p + 0x9e3779b97f4a7c15ULL);
            h = detail::splitmix64(x);
        }
        return Rng(h);
    }

    std::uint64_t next() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range, unbiased via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo >= hi) return lo;
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return lo + static_cast<std::int64_t>(v % range);
    }

    // Box-Muller without a cached spare so the draw count per call is fixed.
    double gaussian() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::array<std::uint64_t, 4> state_{};
};

// Stream namespaces for Rng::derive paths.
enum StreamKind : std::uint64_t {
    kStreamInit = 1,
    kStreamSampler = 2,
    kStreamAugment = 3,
    kStreamNoise = 4,
    kStreamSynth = 5,
};

} // namespace soundclr
