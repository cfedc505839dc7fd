#include "bcpanel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "bcpanel/errors.hpp"
#include "bcpanel/special.hpp"
#include "bcpanel/spline.hpp"

namespace bcpanel {

namespace {

using Chains = std::vector<std::vector<double>>;

bool near_constant(const Chains& chains) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& chain : chains) {
        for (double v : chain) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    return !(hi > lo);
}

/// Split each chain into two halves of floor(n/2) draws (middle draw of an
/// odd-length chain is dropped).
Chains split_chains(const Chains& chains) {
    Chains out;
    for (const auto& chain : chains) {
        const std::size_t half = chain.size() / 2;
        out.emplace_back(chain.begin(), chain.begin() + half);
        out.emplace_back(chain.end() - half, chain.end());
    }
    return out;
}

/// Pooled average ranks (ties averaged), mapped through the normal quantile
/// with the (r - 3/8) / (S + 1/4) offset.
Chains rank_normalize(const Chains& chains) {
    struct Entry {
        double value;
        std::size_t chain, pos;
    };
    std::vector<Entry> entries;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t j = 0; j < chains[c].size(); ++j) {
            entries.push_back({chains[c][j], c, j});
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });
    const double total = static_cast<double>(entries.size());

    Chains out(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) out[c].resize(chains[c].size());
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        while (j < entries.size() && entries[j].value == entries[i].value) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // 1-based mean
        const double z = norm_quantile((avg_rank - 0.375) / (total + 0.25));
        for (std::size_t k = i; k < j; ++k) {
            out[entries[k].chain][entries[k].pos] = z;
        }
        i = j;
    }
    return out;
}

double chain_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double chain_var(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / (static_cast<double>(v.size()) - 1.0);
}

/// Classic split-R-hat on already-transformed chains.
double basic_rhat(const Chains& chains) {
    const std::size_t m = chains.size();
    const double n = static_cast<double>(chains[0].size());
    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = chain_mean(chains[c]);
        w += chain_var(chains[c], means[c]);
    }
    w /= static_cast<double>(m);
    const double grand = chain_mean(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= n / (static_cast<double>(m) - 1.0);
    if (w <= 0.0) return 1.0;
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

void check_shape(const Chains& chains, std::size_t min_chains) {
    if (chains.size() < min_chains) {
        throw ValidationError("diagnostics need at least two chains");
    }
    for (const auto& chain : chains) {
        if (chain.size() < 4) {
            throw ValidationError("diagnostics need at least 4 draws per chain");
        }
        if (chain.size() != chains[0].size()) {
            throw ValidationError("diagnostics need equal-length chains");
        }
    }
}

std::vector<double> pooled(const Chains& chains) {
    std::vector<double> all;
    for (const auto& chain : chains) all.insert(all.end(), chain.begin(), chain.end());
    return all;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double autocovariance(const std::vector<double>& v, double mean, std::size_t lag) {
    const std::size_t n = v.size();
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
        s += (v[i] - mean) * (v[i + lag] - mean);
    }
    return s / static_cast<double>(n);
}

} // namespace

ScalarDiagnostic compute_rhat(const std::vector<std::vector<double>>& chains) {
    check_shape(chains, 2);
    ScalarDiagnostic diag;
    if (near_constant(chains)) {
        diag.zero_variance = true;
        diag.rhat = 1.0;
        return diag;
    }
    const Chains halves = split_chains(chains);
    const double bulk = basic_rhat(rank_normalize(halves));

    const double med = median_of(pooled(halves));
    Chains folded = halves;
    for (auto& chain : folded) {
        for (auto& v : chain) v = std::fabs(v - med);
    }
    const double tail = basic_rhat(rank_normalize(folded));
    diag.rhat = std::max(bulk, tail);
    return diag;
}

ScalarDiagnostic compute_ess(const std::vector<std::vector<double>>& chains) {
    check_shape(chains, 1);
    ScalarDiagnostic diag;
    if (near_constant(chains)) {
        diag.zero_variance = true;
        diag.ess = std::numeric_limits<double>::quiet_NaN();
        return diag;
    }
    const Chains z = rank_normalize(split_chains(chains));
    const std::size_t m = z.size();
    const std::size_t n = z[0].size();

    std::vector<double> means(m), vars(m);
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = chain_mean(z[c]);
        vars[c] = chain_var(z[c], means[c]);
    }
    const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
    double var_plus = w * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
    if (m > 1) {
        const double grand = chain_mean(means);
        double b = 0.0;
        for (double mu : means) b += (mu - grand) * (mu - grand);
        var_plus += b / (static_cast<double>(m) - 1.0);
    }
    if (var_plus <= 0.0) {
        diag.zero_variance = true;
        diag.ess = std::numeric_limits<double>::quiet_NaN();
        return diag;
    }

    const auto mean_acov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += autocovariance(z[c], means[c], lag);
        return s / static_cast<double>(m);
    };

    // Geyer initial monotone positive sequence over lag pairs P_k.
    const std::size_t max_lag = std::min<std::size_t>(n - 1, 2000);
    const double rho_1 = 1.0 - (w - mean_acov(1)) / var_plus;
    double tau = 1.0 + 2.0 * rho_1; // 2 P_0 - 1 with rho_0 = 1
    double prev_pair = 1.0 + rho_1;
    for (std::size_t t = 2; t + 1 <= max_lag; t += 2) {
        const double rho_even = 1.0 - (w - mean_acov(t)) / var_plus;
        const double rho_next = 1.0 - (w - mean_acov(t + 1)) / var_plus;
        double pair = rho_even + rho_next;
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair); // enforce monotone decrease
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n) + 10.0));
    diag.ess = static_cast<double>(m * n) / tau;
    return diag;
}

ScalarDiagnostic diagnose_scalar(const std::vector<std::vector<double>>& chains) {
    ScalarDiagnostic rhat = compute_rhat(chains);
    if (rhat.zero_variance) return rhat;
    const ScalarDiagnostic ess = compute_ess(chains);
    rhat.ess = ess.ess;
    rhat.zero_variance = rhat.zero_variance || ess.zero_variance;
    return rhat;
}

ParameterSummary summarize_column(const std::string& name, const PosteriorDraws& draws,
                                  int col) {
    ParameterSummary s;
    s.name = name;
    std::vector<double> values;
    values.reserve(draws.n_rows());
    for (long d = 0; d < draws.n_rows(); ++d) values.push_back(draws.draws[d * draws.dim + col]);
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::sort(values.begin(), values.end());
    s.q025 = quantile_sorted(values, 0.025);
    s.q975 = quantile_sorted(values, 0.975);
    if (draws.n_chains >= 2 && draws.per_chain >= 4) {
        const auto diag = diagnose_scalar(draws.split_by_chain(col));
        s.rhat = diag.rhat;
        s.ess = diag.ess;
        s.zero_variance = diag.zero_variance;
    }
    return s;
}

std::string diagnostics_report(const PosteriorDraws& draws,
                               const std::vector<std::string>& names) {
    std::ostringstream out;
    char line[256];
    out << "chains: " << draws.n_chains << "\n";
    out << "draws_per_chain: " << draws.per_chain << "\n";
    std::snprintf(line, sizeof(line), "divergent: %ld (%.3f%%)\n",
                  draws.total_divergent(), 100.0 * draws.divergence_rate());
    out << line;
    if (draws.chain_stats.size() == static_cast<std::size_t>(draws.n_chains)) {
        for (int c = 0; c < draws.n_chains; ++c) {
            const auto& st = draws.chain_stats[c];
            std::snprintf(line, sizeof(line),
                          "chain %d: step_size=%.6g mean_accept=%.3f divergences=%ld "
                          "max_depth_hits=%ld\n",
                          c + 1, st.step_size, st.mean_accept, st.divergences,
                          st.max_depth_hits);
            out << line;
        }
    }
    out << "\n";
    std::snprintf(line, sizeof(line), "%-24s %12s %12s %12s %12s %8s %10s\n", "parameter",
                  "mean", "sd", "q2.5", "q97.5", "rhat", "ess");
    out << line;
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto s = summarize_column(names[j], draws, static_cast<int>(j));
        if (s.zero_variance) {
            std::snprintf(line, sizeof(line), "%-24s %12.5g %12.5g %12.5g %12.5g %8s %10s\n",
                          s.name.c_str(), s.mean, s.sd, s.q025, s.q975, "const", "n/a");
        } else {
            std::snprintf(line, sizeof(line), "%-24s %12.5g %12.5g %12.5g %12.5g %8.4f %10.1f\n",
                          s.name.c_str(), s.mean, s.sd, s.q025, s.q975, s.rhat, s.ess);
        }
        out << line;
    }
    return out.str();
}

} // namespace bcpanel
