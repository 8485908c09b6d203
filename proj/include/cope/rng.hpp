#pragma once

#include <cstdint>
#include <random>

namespace cope {

/// splitmix64 step; used to derive independent substream seeds so that
/// (seed, stream ids...) fully determines a generator regardless of
/// thread schedule.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t s1, uint64_t s2) {
    return derive_seed(derive_seed(seed, s1), s2);
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream = 0) {
    return std::mt19937_64(derive_seed(seed, stream));
}

/// Samples an index from an unnormalized nonnegative weight range via
/// inverse CDF; deterministic for a given generator state.
template <class Rng>
int sample_index(const double* w, int n, Rng& rng) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng) * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return n - 1;
}

}  // namespace cope
