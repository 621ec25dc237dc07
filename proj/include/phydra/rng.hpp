#pragma once

#include <cstdint>
#include <random>

namespace phydra {

// splitmix64 step; used to mix seeds for independent streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

// Deterministic RNG. All variate transforms are written out explicitly so a
// given seed produces the same stream on every platform/compiler; std::
// distributions are implementation-defined and are deliberately avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t integer(std::uint64_t n);

    // standard normal via inverse-CDF transform
    double normal();

    double normal(double mu, double sd) { return mu + sd * normal(); }

    double exponential(double rate);

    // Marsaglia-Tsang; shape > 0, scale > 0
    double gamma(double shape, double scale);

    // exact Poisson (gamma-free); splits large means into independent chunks
    long poisson(double lambda);

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace phydra
