#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace acs {

// Derives an independent seed for one named stream of randomness from the
// master seed. splitmix64 finalizer; the stream id is folded in before
// mixing so neighbouring streams do not correlate.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Every stochastic choice a run makes draws from its own stream, so any
// one of them can be replayed without consuming numbers from the others.
enum class SeedStream : std::uint64_t {
    model_init = 1,
    teacher_init = 2,
    noise = 3,
    selector = 4,
    data_gen = 5,
    test_split = 6,
    early_model = 7,
    shuffle_base = 1000, // + epoch index
    sweep_base = 2000,   // + value index
};

inline std::uint64_t split_seed(std::uint64_t master, SeedStream s,
                                std::uint64_t offset = 0) {
    return split_seed(master, static_cast<std::uint64_t>(s) + offset);
}

// Deterministic RNG facade. mt19937_64 output is pinned by the standard;
// the derived draws below avoid std::*_distribution on purpose, because
// those are implementation-defined and would break cross-platform
// reproducibility of committed golden outputs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller, pair cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates, spelled out so the permutation depends only on the
    // engine sequence.
    template <class T>
    void shuffle(std::vector<T>& xs) {
        if (xs.size() < 2) return;
        for (std::size_t i = xs.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(xs[i], xs[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace acs
