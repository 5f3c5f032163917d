#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fingersim {

// Deterministic random streams.
//
// All stochastic components (sensor noise, trajectory jitter, subsampling,
// optimizer restarts) draw from substreams derived from one user seed, so a
// run is reproducible byte-for-byte regardless of thread count or iteration
// order.  Substreams are derived with splitmix64, which is also the generator
// itself: it is small, has a one-word state, and trivially supports the
// "derive stream k of stream j of seed s" pattern used by the parallel cells.

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream id for (seed, a[, b[, c]]): hashes the indices into the seed so that
// distinct tuples give statistically independent streams.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
    std::uint64_t s = seed;
    (void)splitmix64(s);
    s ^= 0x8f1bbcdcbfa53e0bULL + a;
    (void)splitmix64(s);
    s ^= 0x2545f4914f6cdd1dULL + b;
    (void)splitmix64(s);
    s ^= 0x94d049bb133111ebULL + c;
    (void)splitmix64(s);
    return s;
}

// Minimal deterministic generator.  Uniform doubles come from the top 53 bits;
// normals from the Box-Muller transform (two uniforms per pair, no cached
// spare shared across call sites).  The sequences are fully specified here and
// do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform();
    }

    // Standard normal.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so that log(u1) is finite.
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) noexcept {
        return mean + stddev * normal();
    }

    // Uniform integer in [0, n).  n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        // Rejection-free Lemire-style reduction is overkill here; modulo bias
        // for n << 2^64 is far below anything the simulations can resolve,
        // but use the high bits for quality.
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fingersim
