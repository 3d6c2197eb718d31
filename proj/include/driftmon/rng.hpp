#pragma once

// Deterministic random number machinery. All randomness in the toolkit flows
// through these primitives so that results are bit-identical across runs,
// platforms and thread counts. The standard <random> distributions are
// deliberately avoided: their output is implementation-defined.
//
// Stream discipline: a logical stream is identified by (seed, stream,
// substream). The key is produced by chaining the SplitMix64 finalizer, and
// the generator state is expanded from the key with a SplitMix64 sequence.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace driftmon::rng {

// SplitMix64 output function (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Collapses (seed, stream, substream) into one well-mixed 64-bit key.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream = 0,
                                   std::uint64_t substream = 0) {
    std::uint64_t k = splitmix64_finalize(seed);
    k = splitmix64_finalize(k ^ splitmix64_finalize(stream + 0xD1B54A32D192ED03ULL));
    k = splitmix64_finalize(k ^ splitmix64_finalize(substream + 0x8CB92BA72F3D8DD7ULL));
    return k;
}

// xoshiro256++ (Blackman, Vigna 2019). State seeded via SplitMix64 as the
// authors recommend.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t key) {
        std::uint64_t sm = key;
        for (auto& word : state_) {
            sm += 0x9E3779B97F4A7C15ULL;
            word = splitmix64_finalize(sm);
        }
    }

    static Xoshiro256pp for_stream(std::uint64_t seed, std::uint64_t stream = 0,
                                   std::uint64_t substream = 0) {
        return Xoshiro256pp(derive_key(seed, stream, substream));
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, bound), unbiased (rejection on the tail region).
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform on [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> state_{};
};

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, Xoshiro256pp& gen) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

// Uniform k-subset of `pool`, drawn without replacement via a partial
// Fisher-Yates pass. For a fixed generator state, the first k picks of a
// larger draw are a prefix of the k' > k draw over the same pool.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k,
                                          Xoshiro256pp& gen) {
    if (k > pool.size()) k = pool.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(gen.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

// Poisson draw by Knuth's product-of-uniforms method; means above 30 are
// split using Poisson additivity to stay clear of exp() underflow.
inline std::uint64_t poisson(double mean, Xoshiro256pp& gen) {
    std::uint64_t total = 0;
    while (mean > 30.0) {
        double chunk = 30.0;
        double limit = std::exp(-chunk);
        double p = 1.0;
        std::uint64_t k = 0;
        do {
            ++k;
            p *= gen.next_double();
        } while (p > limit);
        total += k - 1;
        mean -= chunk;
    }
    const double limit = std::exp(-mean);
    double p = 1.0;
    std::uint64_t k = 0;
    do {
        ++k;
        p *= gen.next_double();
    } while (p > limit);
    return total + k - 1;
}

}  // namespace driftmon::rng
