#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mlet {

/// Mixes a stream tag into a base seed (splitmix64 finalizer), so one run
/// seed can drive several independent deterministic streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Deterministic random source. Wraps std::mt19937_64 but maps bits to
/// doubles by hand: the std distributions are implementation-defined, and
/// every artifact here (tables, datasets, shuffles) must be reproducible
/// byte for byte from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard Box-Muller; consumes two uniforms per call.
    double gaussian(double mean, double stddev);

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n);

private:
    std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by the given rng.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = rng.index(i);
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace mlet
