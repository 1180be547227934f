#pragma once

#include <cstdint>
#include <string_view>

namespace relyeval {

// FNV-1a, used to fold opaque ids into seeds. Stable across platforms,
// unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// splitmix64. Small, seedable, and identical on every platform, so seeded
// outputs stay byte-identical regardless of standard library.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform draw in [0, n). Rejection-sampled so the distribution is exact.
    std::uint64_t next_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream for one work item (task id, step index)
// from the run-level seed, so parallel scheduling cannot perturb outputs.
inline SplitMix64 split_rng(std::uint64_t seed, std::string_view id, std::uint64_t index = 0) {
    std::uint64_t mixed = seed ^ fnv1a64(id) ^ (0x9e3779b97f4a7c15ull * (index + 1));
    return SplitMix64(mixed);
}

}  // namespace relyeval
