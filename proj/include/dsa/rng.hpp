#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace dsa {

// Mixes a 64-bit value into a well-spread seed (SplitMix64 finalizer).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seedable random stream with reproducible output across platforms.
//
// The engine is std::mt19937_64, whose sequence for a single-value seed is
// fixed by the standard. All variate transforms (uniform doubles, normals,
// bounded integers) are implemented here rather than through std::
// distributions, whose algorithms are implementation-defined. Substreams
// derived from (seed, index) are independent of the order in which they are
// consumed, so per-item generation can run in parallel.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Substream `index` of a base seed; index 0 is reserved for shared draws.
    static Rng substream(std::uint64_t base_seed, std::uint64_t index) {
        return Rng(mix64(base_seed ^ mix64(index + 1)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
    // result exactly uniform and independent of the engine word size.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % range);
    }

    // Standard normal via Box-Muller; the paired variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // In-place Fisher-Yates shuffle; std::shuffle is not portable.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dsa
