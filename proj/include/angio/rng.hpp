#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace angio {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Independent stream families. Every consumer of randomness owns a key
/// derived from (master seed, domain, index), so results do not depend on the
/// order in which streams are advanced.
enum class StreamDomain : std::uint64_t {
    tip = 1,
    initial_condition = 2,
    dominating = 3,
    dominating_rate = 4,
    semigroup = 5,
    resample = 6,
    test = 7,
    ensemble = 8,
};

constexpr std::uint64_t stream_key(std::uint64_t master_seed, StreamDomain domain,
                                   std::uint64_t index) {
    std::uint64_t k = mix64(master_seed ^ 0x6A09E667F3BCC909ULL);
    k = mix64(k ^ (static_cast<std::uint64_t>(domain) * 0x9E3779B97F4A7C15ULL));
    return mix64(k ^ mix64(index + 0xBB67AE8584CAA73BULL));
}

/// Seed of member `index` of the ensemble of size-`n` runs under a master seed.
constexpr std::uint64_t ensemble_seed(std::uint64_t master_seed, std::uint64_t n, std::uint64_t index) {
    return stream_key(mix64(master_seed ^ mix64(n)), StreamDomain::ensemble, index);
}

/// Counter-based generator: the n-th output is mix64(key + n * golden), so a
/// stream is fully described by (key, counter) and can be split without any
/// shared state. Satisfies UniformRandomBitGenerator.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream() = default;
    explicit RngStream(std::uint64_t key) : key_(key) {}
    RngStream(std::uint64_t master_seed, StreamDomain domain, std::uint64_t index)
        : key_(stream_key(master_seed, domain, index)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1], safe for logarithms.
    double uniform_open0() { return 1.0 - uniform(); }

    /// Standard normal (ziggurat).
    double normal() { return boost::random::normal_distribution<double>()(*this); }

    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

    /// Bernoulli trial with the given success probability.
    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace angio
