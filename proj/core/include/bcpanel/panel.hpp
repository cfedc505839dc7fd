#pragma once

#include <string>
#include <vector>

namespace bcpanel {

/// Balanced N x T panel of count outcomes and intervention intensities.
///
/// y_it are outcome counts, a_it are cumulative intervention intensities
/// (non-decreasing within each unit), and x holds an optional N x T x K
/// block of real covariates. first_exposure[i] is the 1-based first period
/// with a_it > 0, or n_times + 1 for never-exposed (control) units.
struct PanelData {
    int n_units = 0;
    int n_times = 0;
    int n_covariates = 0;
    std::vector<long> y;               // row-major N x T
    std::vector<long> a;               // row-major N x T
    std::vector<double> x;             // row-major N x T x K
    std::vector<std::string> unit_labels;
    std::vector<std::string> time_labels;
    std::vector<int> first_exposure;   // g_i

    long y_at(int i, int t0) const { return y[static_cast<std::size_t>(i) * n_times + t0]; }
    long a_at(int i, int t0) const { return a[static_cast<std::size_t>(i) * n_times + t0]; }
    double x_at(int i, int t0, int k) const {
        return x[(static_cast<std::size_t>(i) * n_times + t0) * n_covariates + k];
    }
    const double* x_row(int i, int t0) const {
        return n_covariates == 0
                   ? nullptr
                   : &x[(static_cast<std::size_t>(i) * n_times + t0) * n_covariates];
    }

    /// Cumulative exposure sum_{j<=t} a_ij with 1-based t.
    double cum_exposure(int i, int t) const;

    /// True if cell (i, t) is under intervention (t >= g_i, 1-based t).
    bool exposed(int i, int t) const { return t >= first_exposure[i]; }

    /// Peers recruited at (i, t): a_it - a_{i,t-1}, with a_{i,0} = 0.
    long increments(int i, int t) const;

    int n_exposed_cells() const;
    std::vector<std::pair<int, int>> exposed_cells() const; // 1-based (unit, time)

    /// Recompute first_exposure from a; throws on intensity decreases.
    void derive_first_exposure();

    /// Full structural validation (dimensions, counts, monotone a).
    void validate() const;
};

/// Read a long-format CSV with header `unit,time,y,a[,x1..xK]`. The grid
/// must be complete; time values must be the integers 1..T.
PanelData load_panel(const std::string& path);

/// Write the canonical long-format CSV; load_panel(write_panel(p)) == p.
void write_panel(const PanelData& panel, const std::string& path);

} // namespace bcpanel
