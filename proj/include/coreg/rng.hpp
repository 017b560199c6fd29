#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace coreg {

/// Seeded random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// derives every variate with hand-written transforms so that draws are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (one variate per call, no caching).
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t fnv1a64(std::string_view text);

/// Seed of the named sub-stream of a master seed, e.g. "init.0",
/// "dropout.1", "data_order", "noise".
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view stream_name);

inline Rng derive_stream(std::uint64_t master_seed, std::string_view stream_name) {
    return Rng(derive_seed(master_seed, stream_name));
}

} // namespace coreg
