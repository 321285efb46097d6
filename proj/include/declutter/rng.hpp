#pragma once

// Deterministic random source. Every random draw in the library flows through
// SeededRng so a fixed seed reproduces runs bit for bit. std::uniform_* and
// std::normal_distribution are avoided on purpose: their output sequences are
// implementation-defined and would break cross-toolchain determinism.

#include <cmath>
#include <cstdint>

namespace declutter {

class SeededRng {
public:
    explicit SeededRng(uint64_t seed = 0) : state_(seed + 0x9e3779b97f4a7c15ull) {}

    // splitmix64 step
    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive on both ends
    int uniform_int(int lo, int hi) {
        return lo + int(next_u64() % uint64_t(int64_t(hi) - int64_t(lo) + 1));
    }

    // standard normal via Box-Muller (one value per call keeps replay simple)
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // independent child stream, e.g. one per pipeline stage
    SeededRng fork(uint64_t stream) {
        return SeededRng(next_u64() ^ (stream * 0xd1342543de82ef95ull));
    }

private:
    uint64_t state_;
};

} // namespace declutter
