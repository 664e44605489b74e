#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace concurrence {

/// SplitMix64 finalizer. Used for seeding and for deriving substreams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// xoshiro256** with a stable stream-splitting scheme.
///
/// All distribution helpers are implemented here rather than through
/// <random> distributions, whose output is implementation-defined. A given
/// (seed, draw sequence) therefore produces identical values on every
/// platform. `split(k)` depends only on the seed the generator was built
/// from, never on how many values have been drawn, so work units can derive
/// their streams in any order.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept;

    std::uint64_t seed() const noexcept { return key_; }
    Rng split(std::uint64_t stream) const noexcept;

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n). Unbiased (Lemire's method). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Uniform integer on [lo, hi], inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }
    /// Standard normal via Box-Muller (one variate per call, no cached state).
    double normal() noexcept;
    /// Gamma(shape, 1) via Marsaglia-Tsang.
    double gamma(double shape) noexcept;
    /// 64 independent Bernoulli(p) bits, one per lane.
    std::uint64_t bernoulli_bits(double p) noexcept;

    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t key_;
    std::array<std::uint64_t, 4> s_;
};

}  // namespace concurrence
