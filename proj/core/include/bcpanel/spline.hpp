#pragma once

#include <span>
#include <vector>

namespace bcpanel {

/// Clamped B-spline basis over cumulative exposure.
///
/// The knot vector repeats the boundaries degree+1 times around the interior
/// knots, giving degree + n_interior + 1 basis functions in the full family.
/// The model uses the first degree + n_interior of them as coefficient
/// columns (n_basis, 6 at the defaults), dropping the last function, whose
/// support is the final knot span. Partition of unity is a property of the
/// full family; the truncated column set sums to one only left of the last
/// interior knot.
struct SplineBasis {
    int degree = 3;
    std::vector<double> interior_knots; // sorted, strictly inside (lo, hi)
    double lo = 0.0;
    double hi = 1.0;

    int n_basis() const { return degree + static_cast<int>(interior_knots.size()); }
    int n_full() const { return n_basis() + 1; }

    /// Full clamped knot vector: lo x(p+1), interior..., hi x(p+1).
    std::vector<double> knot_vector() const;

    /// All n_full() basis values at c (clamped to [lo, hi]); sums to 1.
    void eval_full(double c, std::span<double> out) const;

    /// The n_basis() model columns at c: the first n_basis() of eval_full.
    std::vector<double> eval(double c) const;
    void eval(double c, std::span<double> out) const;

    /// s(c) = sum_b w_b B_b(c) over the model columns.
    double value(double c, std::span<const double> coeffs) const;

    /// Interior knots at evenly spaced quantiles (linear interpolation) of
    /// the positive exposures; boundary [0, max]. Throws ValidationError if
    /// fewer than n_interior + 2 distinct positive values are available.
    static SplineBasis build(std::vector<double> positive_exposures, int degree,
                             int n_interior);
};

/// Type-7 quantile (linear interpolation between order statistics) of a
/// sorted sample; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

} // namespace bcpanel
