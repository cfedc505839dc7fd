#include "bcpanel/nuts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "bcpanel/errors.hpp"

namespace bcpanel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxEnergyError = 1000.0;

double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Point {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> grad;
    double lp = 0.0;

    explicit Point(int n) : q(n), p(n), grad(n) {}
};

struct SubtreeResult {
    bool valid = false;          // no divergence, no internal U-turn
    bool divergent = false;
    double log_sum_w = kNegInf;  // logsumexp of exp(-(H - H0)) over nodes
    double sum_accept = 0.0;
    long n_leapfrog = 0;
    std::vector<double> candidate;
    double candidate_lp = 0.0;
    // The subtree's first state in build order (its inner trajectory
    // endpoint); the outer endpoint is the caller's edge after the call.
    std::vector<double> first_q, first_p;
};

class NutsChain {
public:
    NutsChain(const LogDensityModel& model, const SamplerConfig& cfg, int chain_index)
        : model_(model), cfg_(cfg), n_(model.dim()),
          rng_(Rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(chain_index))),
          inv_mass_(n_, 1.0), state_(n_) {}

    void run(std::vector<double>& draws, std::vector<double>& lps,
             std::vector<std::uint8_t>& divergent, ChainStats& stats);

private:
    const LogDensityModel& model_;
    const SamplerConfig& cfg_;
    int n_;
    Rng rng_;
    std::vector<double> inv_mass_;
    Point state_;
    double step_size_ = 1.0;

    // dual averaging state
    double da_mu_ = 0.0;
    double da_log_eps_bar_ = 0.0;
    double da_h_bar_ = 0.0;
    long da_count_ = 0;

    // Welford accumulator for the mass matrix
    std::vector<double> wf_mean_, wf_m2_;
    long wf_count_ = 0;

    void find_initial_point();
    double hamiltonian(const Point& z) const;
    bool leapfrog(Point& z, double eps) const;
    void sample_momentum(Point& z);
    double find_reasonable_step_size();

    void da_init();
    void da_update(double accept_stat);

    void wf_reset();
    void wf_add(std::span<const double> q);
    void wf_finalize();

    bool uturn(const std::vector<double>& q_minus, const std::vector<double>& p_minus,
               const std::vector<double>& q_plus, const std::vector<double>& p_plus) const;
    bool uturn(const Point& minus, const Point& plus) const {
        return uturn(minus.q, minus.p, plus.q, plus.p);
    }
    SubtreeResult build_tree(int depth, Point& edge, double eps, double h0);
    double transition(bool* diverged, long* depth_hit);
};

double NutsChain::hamiltonian(const Point& z) const {
    double kinetic = 0.0;
    for (int i = 0; i < n_; ++i) kinetic += inv_mass_[i] * z.p[i] * z.p[i];
    return -z.lp + 0.5 * kinetic;
}

bool NutsChain::leapfrog(Point& z, double eps) const {
    for (int i = 0; i < n_; ++i) z.p[i] += 0.5 * eps * z.grad[i];
    for (int i = 0; i < n_; ++i) z.q[i] += eps * inv_mass_[i] * z.p[i];
    z.lp = model_.log_density(z.q, z.grad);
    if (!std::isfinite(z.lp)) return false;
    for (int i = 0; i < n_; ++i) {
        if (!std::isfinite(z.grad[i])) return false;
        z.p[i] += 0.5 * eps * z.grad[i];
    }
    return true;
}

void NutsChain::sample_momentum(Point& z) {
    for (int i = 0; i < n_; ++i) {
        z.p[i] = rng_.normal() / std::sqrt(inv_mass_[i]);
    }
}

void NutsChain::find_initial_point() {
    for (int attempt = 0; attempt < 100; ++attempt) {
        model_.initial_point(rng_, state_.q);
        state_.lp = model_.log_density(state_.q, state_.grad);
        if (std::isfinite(state_.lp)) {
            bool ok = true;
            for (double g : state_.grad) {
                if (!std::isfinite(g)) { ok = false; break; }
            }
            if (ok) return;
        }
    }
    throw ConvergenceError("could not find an initial point with finite log density");
}

double NutsChain::find_reasonable_step_size() {
    double eps = 1.0;
    Point z = state_;
    sample_momentum(z);
    const double h0 = hamiltonian(z);

    const auto energy_after_step = [&](double step) {
        Point trial = z;
        if (!leapfrog(trial, step)) return std::numeric_limits<double>::infinity();
        return hamiltonian(trial);
    };

    double h1 = energy_after_step(eps);
    int guard = 0;
    while (!std::isfinite(h1) && guard++ < 64) {
        eps *= 0.5;
        h1 = energy_after_step(eps);
    }
    if (!std::isfinite(h1)) {
        throw ConvergenceError("cannot find a stable step size; log density explodes");
    }
    const double dir = (h0 - h1) > std::log(0.5) ? 1.0 : -1.0;
    guard = 0;
    while (guard++ < 64) {
        if (dir * (h0 - h1) <= dir * std::log(0.5)) break;
        eps *= dir > 0 ? 2.0 : 0.5;
        if (eps > 1e7 || eps < 1e-10) break;
        h1 = energy_after_step(eps);
        if (!std::isfinite(h1)) {
            eps *= 0.5;
            h1 = energy_after_step(eps);
            break;
        }
    }
    return std::clamp(eps, 1e-10, 1e7);
}

void NutsChain::da_init() {
    da_mu_ = std::log(10.0 * step_size_);
    da_log_eps_bar_ = std::log(step_size_);
    da_h_bar_ = 0.0;
    da_count_ = 0;
}

void NutsChain::da_update(double accept_stat) {
    static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    ++da_count_;
    const double m = static_cast<double>(da_count_);
    const double eta = 1.0 / (m + t0);
    da_h_bar_ = (1.0 - eta) * da_h_bar_ + eta * (cfg_.target_accept - accept_stat);
    const double log_eps = da_mu_ - std::sqrt(m) / gamma * da_h_bar_;
    const double w = std::pow(m, -kappa);
    da_log_eps_bar_ = w * log_eps + (1.0 - w) * da_log_eps_bar_;
    step_size_ = std::exp(log_eps);
}

void NutsChain::wf_reset() {
    wf_mean_.assign(n_, 0.0);
    wf_m2_.assign(n_, 0.0);
    wf_count_ = 0;
}

void NutsChain::wf_add(std::span<const double> q) {
    ++wf_count_;
    const double inv = 1.0 / static_cast<double>(wf_count_);
    for (int i = 0; i < n_; ++i) {
        const double d = q[i] - wf_mean_[i];
        wf_mean_[i] += d * inv;
        wf_m2_[i] += d * (q[i] - wf_mean_[i]);
    }
}

void NutsChain::wf_finalize() {
    if (wf_count_ < 2) return;
    const double cnt = static_cast<double>(wf_count_);
    for (int i = 0; i < n_; ++i) {
        const double var = wf_m2_[i] / (cnt - 1.0);
        // Shrink toward a small diagonal, as in windowed HMC adaptation.
        inv_mass_[i] = (cnt / (cnt + 5.0)) * var + 1e-3 * (5.0 / (cnt + 5.0));
    }
}

bool NutsChain::uturn(const std::vector<double>& q_minus,
                      const std::vector<double>& p_minus,
                      const std::vector<double>& q_plus,
                      const std::vector<double>& p_plus) const {
    double dot_minus = 0.0, dot_plus = 0.0;
    for (int i = 0; i < n_; ++i) {
        const double dq = q_plus[i] - q_minus[i];
        dot_minus += dq * inv_mass_[i] * p_minus[i];
        dot_plus += dq * inv_mass_[i] * p_plus[i];
    }
    return dot_minus < 0.0 || dot_plus < 0.0;
}

SubtreeResult NutsChain::build_tree(int depth, Point& edge, double eps, double h0) {
    SubtreeResult result;
    if (depth == 0) {
        const bool ok = leapfrog(edge, eps);
        result.n_leapfrog = 1;
        const double h = ok ? hamiltonian(edge) : std::numeric_limits<double>::infinity();
        const double dh = h - h0;
        if (!ok || !std::isfinite(dh) || dh > kMaxEnergyError) {
            result.valid = false;
            result.divergent = true;
            result.sum_accept = 0.0;
            return result;
        }
        result.valid = true;
        result.log_sum_w = -dh;
        result.sum_accept = std::min(1.0, std::exp(-dh));
        result.candidate = edge.q;
        result.candidate_lp = edge.lp;
        result.first_q = edge.q;
        result.first_p = edge.p;
        return result;
    }

    SubtreeResult first = build_tree(depth - 1, edge, eps, h0);
    if (!first.valid) return first;

    SubtreeResult second = build_tree(depth - 1, edge, eps, h0);
    first.sum_accept += second.sum_accept;
    first.n_leapfrog += second.n_leapfrog;
    first.divergent = first.divergent || second.divergent;
    if (!second.valid) {
        first.valid = false;
        return first;
    }

    const double total = log_sum_exp(first.log_sum_w, second.log_sum_w);
    if (std::log(rng_.uniform_pos()) < second.log_sum_w - total) {
        first.candidate = std::move(second.candidate);
        first.candidate_lp = second.candidate_lp;
    }
    first.log_sum_w = total;

    // U-turn across the merged subtree's own endpoints: its first state in
    // build order and the current edge. Orientation follows the sign of eps.
    if (eps > 0.0) {
        if (uturn(first.first_q, first.first_p, edge.q, edge.p)) first.valid = false;
    } else {
        if (uturn(edge.q, edge.p, first.first_q, first.first_p)) first.valid = false;
    }
    return first;
}

double NutsChain::transition(bool* diverged, long* depth_hit) {
    sample_momentum(state_);
    const double h0 = hamiltonian(state_);

    Point fwd = state_;
    Point bwd = state_;
    std::vector<double> candidate = state_.q;
    double candidate_lp = state_.lp;
    double traj_log_sum = 0.0;
    double sum_accept = 0.0;
    long n_leapfrog = 0;
    *diverged = false;

    for (int depth = 0; depth < cfg_.max_tree_depth; ++depth) {
        const bool forward = (rng_.next_u64() & 1u) != 0;
        Point& edge = forward ? fwd : bwd;
        SubtreeResult sub =
            build_tree(depth, edge, forward ? step_size_ : -step_size_, h0);
        sum_accept += sub.sum_accept;
        n_leapfrog += sub.n_leapfrog;
        if (sub.divergent) *diverged = true;
        if (!sub.valid) break;

        if (std::log(rng_.uniform_pos()) < sub.log_sum_w - traj_log_sum) {
            candidate = std::move(sub.candidate);
            candidate_lp = sub.candidate_lp;
        }
        traj_log_sum = log_sum_exp(traj_log_sum, sub.log_sum_w);

        if (uturn(bwd, fwd)) break;
        if (depth + 1 == cfg_.max_tree_depth && depth_hit != nullptr) ++(*depth_hit);
    }

    state_.q = std::move(candidate);
    state_.lp = model_.log_density(state_.q, state_.grad);
    return n_leapfrog > 0 ? sum_accept / static_cast<double>(n_leapfrog) : 0.0;
}

void NutsChain::run(std::vector<double>& draws, std::vector<double>& lps,
                    std::vector<std::uint8_t>& divergent, ChainStats& stats) {
    find_initial_point();
    step_size_ = find_reasonable_step_size();
    da_init();

    const long warmup = cfg_.n_warmup;
    // Warm-up phases: step-size only, doubling mass-matrix windows, final
    // step-size polish.
    const long init_len = std::max<long>(1, static_cast<long>(0.15 * warmup));
    const long term_len = std::max<long>(1, static_cast<long>(0.10 * warmup));
    const long slow_len = std::max<long>(0, warmup - init_len - term_len);

    std::vector<long> window_ends;
    if (slow_len > 0) {
        long window = std::max<long>(25, slow_len / 15);
        long at = init_len;
        while (true) {
            long end = at + window;
            // absorb the tail if the next doubling would not fit
            if (end + 2 * window > init_len + slow_len) end = init_len + slow_len;
            window_ends.push_back(end);
            if (end >= init_len + slow_len) break;
            at = end;
            window *= 2;
        }
    }

    wf_reset();
    long warmup_divergences = 0;
    std::size_t window_idx = 0;

    for (long m = 0; m < cfg_.n_iter; ++m) {
        bool diverged = false;
        const bool in_warmup = m < warmup;
        const double accept_stat =
            transition(&diverged, in_warmup ? nullptr : &stats.max_depth_hits);

        if (in_warmup) {
            if (diverged) ++warmup_divergences;
            da_update(accept_stat);
            const bool in_slow = slow_len > 0 && m >= init_len && m < init_len + slow_len;
            if (in_slow) {
                wf_add(state_.q);
                if (window_idx < window_ends.size() && m + 1 == window_ends[window_idx]) {
                    wf_finalize();
                    wf_reset();
                    ++window_idx;
                    step_size_ = find_reasonable_step_size();
                    da_init();
                }
            }
            if (m + 1 == warmup) {
                step_size_ = std::exp(da_log_eps_bar_);
                if (warmup_divergences == warmup) {
                    throw ConvergenceError(
                        "every warm-up transition diverged (step size " +
                        std::to_string(step_size_) + "); the posterior is not sampleable "
                        "at this configuration");
                }
            }
        } else {
            stats.mean_accept += accept_stat;
            if (diverged) ++stats.divergences;
            const long post = m - warmup;
            if ((post + 1) % cfg_.thin == 0) {
                draws.insert(draws.end(), state_.q.begin(), state_.q.end());
                lps.push_back(state_.lp);
                divergent.push_back(diverged ? 1 : 0);
            }
        }
    }
    const long post_iters = cfg_.n_iter - warmup;
    if (post_iters > 0) stats.mean_accept /= static_cast<double>(post_iters);
    stats.step_size = step_size_;
}

} // namespace

SamplerConfig SamplerConfig::from(const McmcConfig& mcmc, int threads) {
    SamplerConfig cfg;
    cfg.n_chains = mcmc.chains;
    cfg.n_iter = mcmc.iterations;
    cfg.n_warmup = mcmc.warmup;
    cfg.thin = mcmc.thin;
    cfg.target_accept = mcmc.target_accept;
    cfg.max_tree_depth = mcmc.max_tree_depth;
    cfg.seed = mcmc.seed;
    cfg.threads = threads;
    return cfg;
}

void SamplerConfig::validate(int model_dim) const {
    if (model_dim <= 0) throw ValidationError("sampler: model has no parameters");
    if (n_chains < 1) throw ValidationError("sampler: need at least one chain");
    if (n_iter <= 0) throw ValidationError("sampler: zero-iteration run");
    if (n_warmup < 0 || n_warmup >= n_iter) {
        throw ValidationError("sampler: warmup must satisfy 0 <= warmup < iterations");
    }
    if (thin < 1) throw ValidationError("sampler: thin must be >= 1");
    if ((n_iter - n_warmup) / thin < 1) {
        throw ValidationError("sampler: no draws retained after warmup and thinning");
    }
    if (max_tree_depth < 1) throw ValidationError("sampler: max_tree_depth must be >= 1");
}

long PosteriorDraws::total_divergent() const {
    long n = 0;
    for (auto d : divergent) n += d;
    return n;
}

double PosteriorDraws::divergence_rate() const {
    return n_rows() > 0 ? static_cast<double>(total_divergent()) /
                              static_cast<double>(n_rows())
                        : 0.0;
}

std::vector<std::vector<double>> PosteriorDraws::split_by_chain(int col) const {
    std::vector<std::vector<double>> out(n_chains);
    for (int c = 0; c < n_chains; ++c) out[c].reserve(per_chain);
    for (long d = 0; d < n_rows(); ++d) {
        out[chain_id[d]].push_back(draws[d * dim + col]);
    }
    return out;
}

PosteriorDraws run_chains(const LogDensityModel& model, const SamplerConfig& config) {
    config.validate(model.dim());
    const int n_chains = config.n_chains;
    const long per_chain = (config.n_iter - config.n_warmup) / config.thin;

    struct ChainOutput {
        std::vector<double> draws;
        std::vector<double> lps;
        std::vector<std::uint8_t> divergent;
        ChainStats stats;
        std::exception_ptr error;
    };
    std::vector<ChainOutput> outputs(n_chains);

    const auto run_one = [&](int c) {
        try {
            NutsChain chain(model, config, c);
            chain.run(outputs[c].draws, outputs[c].lps, outputs[c].divergent,
                      outputs[c].stats);
        } catch (...) {
            outputs[c].error = std::current_exception();
        }
    };

    int budget = config.threads > 0
                     ? config.threads
                     : static_cast<int>(std::thread::hardware_concurrency());
    budget = std::max(1, std::min(budget, n_chains));
    if (budget == 1) {
        for (int c = 0; c < n_chains; ++c) run_one(c);
    } else {
        for (int start = 0; start < n_chains; start += budget) {
            std::vector<std::thread> workers;
            const int end = std::min(n_chains, start + budget);
            for (int c = start; c < end; ++c) workers.emplace_back(run_one, c);
            for (auto& t : workers) t.join();
        }
    }
    for (auto& out : outputs) {
        if (out.error) std::rethrow_exception(out.error);
    }

    PosteriorDraws result;
    result.dim = model.dim();
    result.n_chains = n_chains;
    result.per_chain = per_chain;
    result.draws.reserve(static_cast<std::size_t>(n_chains) * per_chain * result.dim);
    for (int c = 0; c < n_chains; ++c) {
        result.draws.insert(result.draws.end(), outputs[c].draws.begin(),
                            outputs[c].draws.end());
        result.lp.insert(result.lp.end(), outputs[c].lps.begin(), outputs[c].lps.end());
        result.divergent.insert(result.divergent.end(), outputs[c].divergent.begin(),
                                outputs[c].divergent.end());
        result.chain_id.insert(result.chain_id.end(), outputs[c].lps.size(), c);
        result.chain_stats.push_back(outputs[c].stats);
    }
    return result;
}

} // namespace bcpanel
