#pragma once

#include <string>
#include <vector>

#include "bcpanel/nuts.hpp"

namespace bcpanel {

struct ScalarDiagnostic {
    double rhat = 1.0;
    double ess = 0.0;
    bool zero_variance = false;
};

/// Rank-normalized split R-hat (max of bulk and folded variants). Chains of
/// equal length; needs >= 2 chains after splitting and >= 4 draws per chain.
/// Constant input reports 1 with the zero-variance flag set.
ScalarDiagnostic compute_rhat(const std::vector<std::vector<double>>& chains);

/// Bulk effective sample size: rank-normalized split chains, per-chain
/// autocovariances combined across chains, Geyer initial monotone sequence.
ScalarDiagnostic compute_ess(const std::vector<std::vector<double>>& chains);

ScalarDiagnostic diagnose_scalar(const std::vector<std::vector<double>>& chains);

/// Per-parameter summary block for reports.
struct ParameterSummary {
    std::string name;
    double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0;
    double rhat = 1.0, ess = 0.0;
    bool zero_variance = false;
};

ParameterSummary summarize_column(const std::string& name, const PosteriorDraws& draws,
                                  int col);

/// Structured-text convergence report: header with chains/draws/divergences,
/// then one line per named column.
std::string diagnostics_report(const PosteriorDraws& draws,
                               const std::vector<std::string>& names);

} // namespace bcpanel
