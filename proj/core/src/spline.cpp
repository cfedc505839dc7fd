#include "bcpanel/spline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "bcpanel/errors.hpp"

namespace bcpanel {

double quantile_sorted(std::span<const double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 0) throw ValidationError("quantile of empty sample");
    if (n == 1) return sorted[0];
    const double h = (static_cast<double>(n) - 1.0) * p;
    const std::size_t j = static_cast<std::size_t>(std::floor(h));
    if (j + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(j);
    return sorted[j] + frac * (sorted[j + 1] - sorted[j]);
}

std::vector<double> SplineBasis::knot_vector() const {
    std::vector<double> t;
    t.reserve(2 * (degree + 1) + interior_knots.size());
    for (int i = 0; i <= degree; ++i) t.push_back(lo);
    t.insert(t.end(), interior_knots.begin(), interior_knots.end());
    for (int i = 0; i <= degree; ++i) t.push_back(hi);
    return t;
}

void SplineBasis::eval_full(double c, std::span<double> out) const {
    const int p = degree;
    const int nf = n_full();
    const std::vector<double> t = knot_vector();
    c = std::clamp(c, lo, hi);

    // Knot span index k with t[k] <= c < t[k+1]; c == hi lands in the last
    // non-degenerate span.
    int k = p;
    const int last = nf - 1; // t[last] .. t[last+1] is the final span
    if (c >= hi) {
        k = last;
    } else {
        while (k < last && c >= t[k + 1]) ++k;
    }

    // Local triangular scheme: N[r] holds B_{k-j+r,j}(c) at level j.
    std::vector<double> N(p + 1, 0.0);
    std::vector<double> left(p + 1, 0.0), right(p + 1, 0.0);
    N[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = c - t[k + 1 - j];
        right[j] = t[k + j] - c;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom != 0.0 ? N[r] / denom : 0.0;
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }

    std::fill(out.begin(), out.end(), 0.0);
    for (int r = 0; r <= p; ++r) {
        const int idx = k - p + r;
        if (idx >= 0 && idx < nf) out[idx] = N[r];
    }
}

std::vector<double> SplineBasis::eval(double c) const {
    std::vector<double> out(n_basis());
    eval(c, out);
    return out;
}

void SplineBasis::eval(double c, std::span<double> out) const {
    std::vector<double> full(n_full());
    eval_full(c, full);
    std::copy(full.begin(), full.begin() + n_basis(), out.begin());
}

double SplineBasis::value(double c, std::span<const double> coeffs) const {
    std::vector<double> b(n_basis());
    eval(c, b);
    double s = 0.0;
    for (int i = 0; i < n_basis(); ++i) s += coeffs[i] * b[i];
    return s;
}

SplineBasis SplineBasis::build(std::vector<double> positive_exposures, int degree,
                               int n_interior) {
    if (degree < 1) throw ValidationError("spline degree must be >= 1");
    if (n_interior < 0) throw ValidationError("interior knot count must be >= 0");

    std::vector<double>& vals = positive_exposures;
    vals.erase(std::remove_if(vals.begin(), vals.end(),
                              [](double v) { return !(v > 0.0); }),
               vals.end());
    if (vals.empty()) throw ValidationError("no positive cumulative exposures");
    std::sort(vals.begin(), vals.end());

    const std::set<double> distinct(vals.begin(), vals.end());
    if (static_cast<int>(distinct.size()) < n_interior + 2) {
        throw ValidationError(
            "too few distinct positive exposures for " + std::to_string(n_interior) +
            " interior knots; reduce the knot count for this analysis");
    }

    SplineBasis basis;
    basis.degree = degree;
    basis.lo = 0.0;
    basis.hi = vals.back();
    for (int j = 1; j <= n_interior; ++j) {
        const double p = static_cast<double>(j) / (n_interior + 1);
        basis.interior_knots.push_back(quantile_sorted(vals, p));
    }
    for (double knot : basis.interior_knots) {
        if (!(knot > basis.lo && knot < basis.hi)) {
            throw ValidationError(
                "exposure quantiles collapse onto the boundary; reduce the knot "
                "count for this analysis");
        }
    }
    return basis;
}

} // namespace bcpanel
