#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace phydra {

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(1 + e^x) without overflow
inline double log1pexp(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double log_sum_exp(double a, double b) {
    double m = std::max(a, b);
    if (!std::isfinite(m)) return m;  // both -inf, or one is +inf/nan
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

// Quantile with linear interpolation of order statistics (R type 7).
// Sorts a copy; fine for the sizes we summarize.
double quantile(std::span<const double> xs, double prob);
double quantile_sorted(std::span<const double> sorted, double prob);

inline double median(std::span<const double> xs) { return quantile(xs, 0.5); }

double mean(std::span<const double> xs);
// Unbiased (n-1) sample variance.
double variance(std::span<const double> xs);

// Inverse standard normal CDF (Wichura's PPND16, AS 241). |error| < 1e-15.
double inverse_normal_cdf(double p);

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_log_pdf(double x, double mu = 0.0, double sd = 1.0) {
    static const double kLog2Pi = 1.8378770664093454836;
    double z = (x - mu) / sd;
    return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

}  // namespace phydra
