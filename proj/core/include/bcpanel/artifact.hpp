#pragma once

#include <string>
#include <vector>

#include "bcpanel/config.hpp"
#include "bcpanel/diagnostics.hpp"
#include "bcpanel/model.hpp"
#include "bcpanel/nuts.hpp"
#include "bcpanel/panel.hpp"
#include "bcpanel/spline.hpp"

namespace bcpanel {

/// A fit artifact directory. Contains everything downstream stages need to
/// run without refitting:
///   meta.json        format version, dims, seed, mode
///   panel.csv        input panel echo
///   config.ini       resolved configuration echo
///   basis.json       spline knots (bit-exact reproduction of evaluations)
///   draws.csv        chain, draw, lp, divergent, one column per constrained
///                    parameter
///   diagnostics.txt  R-hat / ESS / divergence report
struct FitArtifact {
    PanelData panel;
    RunConfig config;
    SplineBasis basis;
    ParamLayout layout;
    std::vector<std::string> names;      // constrained column names
    std::vector<double> rows;            // n_draws x layout.total, constrained
    std::vector<double> lp;
    std::vector<std::uint8_t> divergent;
    std::vector<int> chain_id;
    int n_chains = 0;

    long n_draws() const { return layout.total == 0 ? 0 : static_cast<long>(rows.size()) / layout.total; }
    double divergence_rate() const;

    static FitArtifact open(const std::string& dir);
};

/// Build the basis a fit on this panel/config uses (quantile knots over the
/// positive cumulative exposures of exposed cells). PreIntervention fits
/// keep the basis for provenance even though no treatment term is estimated.
SplineBasis basis_for(const PanelData& panel, const RunConfig& config);

/// Run the sampler for panel+config and persist the artifact under dir.
FitArtifact write_fit_artifact(const std::string& dir, const PanelData& panel,
                               const RunConfig& config, int threads);

/// Persist an externally constructed artifact (used by tests).
void save_artifact(const std::string& dir, const PanelData& panel,
                   const RunConfig& config, const SplineBasis& basis,
                   const PanelModel& model, const PosteriorDraws& draws);

} // namespace bcpanel
