#pragma once

#include <cstddef>
#include <span>

namespace phydra {

// Differentiable unnormalized log density over R^dim.
class LogDensityTarget {
  public:
    virtual ~LogDensityTarget() = default;
    virtual std::size_t dim() const = 0;
    // Returns log density at theta; when grad is non-null, fills dim()
    // entries with the gradient. A return of -inf marks forbidden states
    // (gradient contents are then unspecified).
    virtual double log_density(std::span<const double> theta, double* grad) const = 0;
};

}  // namespace phydra
