#pragma once

#include <cstdint>

namespace microdispatch {

// splitmix64: tiny, well-mixed 64-bit generator. Used both as a stream RNG and
// as a hash to derive independent substreams from (seed, tag, tag, ...) tuples,
// so every random draw in the pipeline is a pure function of the scenario seed
// and its coordinates — no shared mutable generator state, no ordering hazards.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi]
    double next_in(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // modulo bias is irrelevant for the tiny n used here (tie-breaks)
        return n == 0 ? 0 : next() % n;
    }
};

// Derive a substream seed from a base seed and up to three coordinates.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
    SplitMix64 g(seed);
    g.state ^= 0x2545f4914f6cdd1dULL * (a + 1);
    g.next();
    g.state ^= 0x9e3779b97f4a7c15ULL * (b + 1);
    g.next();
    g.state ^= 0xd6e8feb86659fd93ULL * (c + 1);
    g.next();
    return g.next();
}

} // namespace microdispatch
