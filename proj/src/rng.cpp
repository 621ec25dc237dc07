#include "phydra/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "phydra/util.hpp"

namespace phydra {

static std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t state = a;
    std::uint64_t out = splitmix64(state);
    state ^= b + 0x9e3779b97f4a7c15ULL;
    out ^= splitmix64(state);
    state ^= c + 0xc2b2ae3d27d4eb4fULL;
    out ^= splitmix64(state);
    return out;
}

std::uint64_t Rng::integer(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::integer: n must be positive");
    // rejection sampling to avoid modulo bias
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    // inverse CDF keeps the draw count per variate fixed at one
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return inverse_normal_cdf(u);
}

double Rng::exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("Rng::exponential: rate must be positive");
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return -std::log(u) / rate;
}

double Rng::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("Rng::gamma: shape and scale must be positive");
    if (shape < 1.0) {
        // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

long Rng::poisson(double lambda) {
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw std::invalid_argument("Rng::poisson: lambda must be finite and >= 0");
    long total = 0;
    // Poisson(a + b) = Poisson(a) + Poisson(b); keeps exp(-lambda) away from underflow
    while (lambda > 300.0) {
        lambda -= 300.0;
        double l = std::exp(-300.0);
        double prod = uniform();
        while (prod > l) {
            ++total;
            prod *= uniform();
        }
    }
    if (lambda == 0.0) return total;
    double l = std::exp(-lambda);
    double prod = uniform();
    while (prod > l) {
        ++total;
        prod *= uniform();
    }
    return total;
}

}  // namespace phydra
