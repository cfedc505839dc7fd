#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bcpanel/config.hpp"
#include "bcpanel/panel.hpp"
#include "bcpanel/rng.hpp"

namespace bcpanel {

/// Interval score: (hi-lo) + (2/alpha)(lo-y)1{y<lo} + (2/alpha)(y-hi)1{y>hi}.
/// Boundary values count as inside.
double interval_score(double y, double lo, double hi, double alpha = 0.05);

/// One randomly chosen time period per exposed unit (g_i <= T), 1-based
/// (unit, time) pairs. Control units are never masked.
std::vector<std::pair<int, int>> make_cv_mask(const PanelData& panel, Rng& rng);

struct CvOptions {
    std::vector<int> h_grid = {0, 1, 2, 3, 4, 5};
    int n_replicates = 50;
    McmcConfig mcmc;          // shortened per-fold budget
    std::uint64_t seed = 1;
    int threads = 0;
    double rhat_threshold = 1.05;

    CvOptions() {
        mcmc.chains = 2;
        mcmc.iterations = 10000;
        mcmc.warmup = 5000;
        mcmc.thin = 5;
    }
};

struct CvCell {
    int h = 0;
    int replicate = 0;
    double mspe = 0.0;
    double is = 0.0;
    double max_rhat = 0.0;
    bool converged = true;
};

struct CvAggregate {
    int h = 0;
    double mspe = 0.0;
    double is = 0.0;
    int n_excluded = 0;
};

struct CvResult {
    std::vector<CvCell> cells;          // ordered by (h, replicate)
    std::vector<CvAggregate> aggregates; // ordered by h
    int selected_h = 0;                  // argmin MSPE, ties toward smaller h
};

/// Appendix-style leave-one-out CV over the number of factors: mask one
/// period per exposed unit per replicate, fit the full model for every h,
/// score the masked cells with posterior-predictive draws (NB(q0, phi0)
/// before first exposure, NB(q1, phi1) after), and aggregate MSPE and
/// interval score by summation. Fits whose identifiable functionals exceed
/// the R-hat threshold are excluded and counted.
CvResult run_cv(const PanelData& panel, const RunConfig& config, const CvOptions& options);

} // namespace bcpanel
