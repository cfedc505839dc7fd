#pragma once

#include <span>

#include "bcpanel/rng.hpp"

namespace bcpanel {

/// Differentiable unnormalized log density on an unconstrained space.
/// Returning a non-finite value signals rejection to the sampler.
class LogDensityModel {
public:
    virtual ~LogDensityModel() = default;

    virtual int dim() const = 0;

    /// Log density at pos. When grad is non-empty it has size dim() and is
    /// filled with the gradient.
    virtual double log_density(std::span<const double> pos,
                               std::span<double> grad) const = 0;

    /// Starting point for one chain; default is U(-1, 1) per coordinate.
    virtual void initial_point(Rng& rng, std::span<double> out) const {
        for (auto& v : out) v = rng.uniform(-1.0, 1.0);
    }
};

} // namespace bcpanel
