// Command-line pipeline around the bcpanel library:
//   fit       sample the posterior and persist a fit artifact
//   impute    draw untreated potential outcomes under one or more rho priors
//   estimate  turn a fit plus counterfactuals into estimand reports
//   cv        cross-validate the number of factors
//   simulate  run the full-vs-cut coverage study
//   diagnose  print the convergence report of an artifact
//
// Exit codes: 0 ok, 2 validation, 3 non-convergence, 4 I/O.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcpanel/artifact.hpp"
#include "bcpanel/copula.hpp"
#include "bcpanel/cv.hpp"
#include "bcpanel/diagnostics.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/estimands.hpp"
#include "bcpanel/sim.hpp"
#include "bcpanel/textio.hpp"
#include "bcpanel/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bcpanel;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

std::string tag_for(const RhoPrior& prior) {
    std::string tag = prior.str();
    for (char& c : tag) {
        if (c == ':' || c == ',') c = '_';
        if (c == '-') c = 'm';
        if (c == '.') c = 'p';
    }
    return tag;
}

std::string summary_csv(const std::vector<EstimandSummary>& rows) {
    std::ostringstream out;
    out << "name,mean,cri_lo,cri_hi,p_positive,n_draws,n_excluded\n";
    for (const auto& s : rows) {
        out << s.name << ',' << format_double(s.mean) << ',' << format_double(s.cri_lo)
            << ',' << format_double(s.cri_hi) << ',' << format_double(s.p_positive)
            << ',' << s.n_draws << ',' << s.n_excluded << "\n";
    }
    return out.str();
}

struct CliSeed {
    std::uint64_t value = 0;
    bool set = false;
};

int parse_window(const std::string& text, int& lo, int& hi) {
    const auto parts = split(text, ':');
    if (parts.size() != 2) return -1;
    const auto a = parse_long(parts[0]);
    const auto b = parse_long(parts[1]);
    if (!a || !b) return -1;
    lo = static_cast<int>(*a);
    hi = static_cast<int>(*b);
    return 0;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const std::string& panel_path, const std::string& config_path,
            const std::string& out_dir, const std::string& mode, CliSeed seed,
            int threads) {
    PanelData panel = load_panel(panel_path);
    RunConfig config = load_config(config_path);
    if (!mode.empty()) config.fit_mode = fit_mode_from_string(mode);
    if (seed.set) config.mcmc.seed = seed.value;
    ensure_dir(out_dir);
    const FitArtifact art = write_fit_artifact(out_dir, panel, config, threads);
    std::cout << "fit: mode=" << to_string(art.config.fit_mode)
              << " draws=" << art.n_draws()
              << " divergence_rate=" << art.divergence_rate() << "\n";
    std::cout << "artifact: " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------- impute

int cmd_impute(const std::string& artifact_dir, std::vector<std::string> rho_args,
               const std::string& out_dir, CliSeed seed, int threads) {
    const FitArtifact art = FitArtifact::open(artifact_dir);
    if (rho_args.empty()) rho_args.push_back(art.config.rho_prior.str());
    ensure_dir(out_dir);

    if (art.divergence_rate() > 0.005) {
        std::cerr << "warning: divergence rate "
                  << art.divergence_rate() * 100.0 << "% exceeds 0.5%; "
                  << "counterfactual draws may be unreliable\n";
    }
    if (art.config.fit_mode == FitMode::PreIntervention) {
        std::cerr << "note: pre-intervention fit; potential outcomes are imputed "
                     "independently (rho = 0) for every requested prior\n";
    }

    const std::uint64_t base_seed = seed.set ? seed.value : art.config.mcmc.seed;
    json index;
    index["artifact"] = fs::absolute(artifact_dir).string();
    index["format"] = kArtifactFormatVersion;
    index["sets"] = json::array();

    for (std::size_t k = 0; k < rho_args.size(); ++k) {
        const RhoPrior prior = RhoPrior::parse(rho_args[k]);
        const std::uint64_t set_seed =
            Rng::derive_seed(base_seed, 0x1A7000ULL + static_cast<std::uint64_t>(k));
        const CounterfactualDraws cf =
            impute_y0(art.rows, art.layout, art.panel, art.basis, art.config, prior,
                      set_seed, threads);
        const std::string file = "counterfactual_" + tag_for(prior) + ".csv";
        std::ostringstream out;
        out << "draw,unit,time,y0,rho\n";
        for (long d = 0; d < cf.n_draws; ++d) {
            for (std::size_t c = 0; c < cf.cells.size(); ++c) {
                out << (d + 1) << ',' << art.panel.unit_labels[cf.cells[c].first - 1]
                    << ',' << cf.cells[c].second << ',' << cf.y0_at(d, c) << ','
                    << format_double(cf.rho_used[d]) << "\n";
            }
        }
        write_text_file(out_dir + "/" + file, out.str());
        index["sets"].push_back({{"tag", tag_for(prior)},
                                 {"prior", prior.str()},
                                 {"file", file},
                                 {"seed", set_seed}});
        std::cout << "imputed " << cf.n_draws << " draws x " << cf.cells.size()
                  << " cells under " << prior.str() << "\n";
    }
    write_text_file(out_dir + "/index.json", index.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- estimate

CounterfactualDraws read_counterfactuals(const std::string& path, const PanelData& panel) {
    const CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"draw", "unit", "time", "y0", "rho"}) {
        throw IoError("unexpected counterfactual CSV header: " + path);
    }
    CounterfactualDraws cf;
    cf.cells = panel.exposed_cells();
    const std::size_t n_cells = cf.cells.size();
    if (n_cells == 0) throw ValidationError("no exposed cells");
    if (table.rows.size() % n_cells != 0) {
        throw IoError("counterfactual CSV does not tile the exposed cells: " + path);
    }
    cf.n_draws = static_cast<long>(table.rows.size() / n_cells);
    cf.y0.reserve(table.rows.size());
    cf.rho_used.assign(cf.n_draws, 0.0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t c = r % n_cells;
        const auto y0 = parse_long(row[3]);
        const auto rho = parse_double(row[4]);
        const auto t = parse_long(row[2]);
        if (!y0 || !rho || !t) throw IoError("bad counterfactual row in " + path);
        if (trim(row[1]) != panel.unit_labels[cf.cells[c].first - 1] ||
            static_cast<int>(*t) != cf.cells[c].second) {
            throw IoError("counterfactual cells out of order in " + path);
        }
        cf.y0.push_back(*y0);
        cf.rho_used[r / n_cells] = *rho;
    }
    return cf;
}

int cmd_estimate(const std::string& impute_dir, const std::string& out_dir,
                 const std::string& window) {
    json index;
    try {
        index = json::parse(read_text_file(impute_dir + "/index.json"));
    } catch (const json::exception& e) {
        throw IoError("corrupt index.json in " + impute_dir + ": " + e.what());
    }
    if (index.value("format", -1) != kArtifactFormatVersion) {
        throw IoError("imputation set was written by an incompatible version");
    }
    const FitArtifact art = FitArtifact::open(index.at("artifact").get<std::string>());
    ensure_dir(out_dir);

    RunConfig config = art.config;
    if (!window.empty()) {
        if (parse_window(window, config.lockdown_start, config.lockdown_end) != 0) {
            throw ValidationError("bad --window; expected t0:t1");
        }
        config.validate();
        if (config.lockdown_end > art.panel.n_times) {
            throw ValidationError("estimand window outside the panel");
        }
    }

    if (art.layout.has_treatment_block()) {
        const auto grid = omega_grid(art.rows, art.layout, art.panel, art.basis, config);
        std::ostringstream out;
        out << "cum_a,lockdown,mean,cri_lo,cri_hi,p_above_1\n";
        for (const auto& row : grid) {
            out << format_double(row.cum_a) << ',' << (row.lockdown ? 1 : 0) << ','
                << format_double(row.summary.mean) << ','
                << format_double(row.summary.cri_lo) << ','
                << format_double(row.summary.cri_hi) << ','
                << format_double(row.summary.p_positive) << "\n";
        }
        write_text_file(out_dir + "/omega_grid.csv", out.str());
    }

    for (const auto& set : index.at("sets")) {
        const std::string tag = set.at("tag").get<std::string>();
        const CounterfactualDraws cf =
            read_counterfactuals(impute_dir + "/" + set.at("file").get<std::string>(),
                                 art.panel);
        const EstimandReport report =
            estimand_report(art.rows, art.layout, art.panel, art.basis, config, cf);
        write_text_file(out_dir + "/estimands_" + tag + ".csv",
                        summary_csv(report.scalars));
        std::ostringstream ite;
        ite << "unit,time,mean,cri_lo,cri_hi,p_positive\n";
        for (const auto& [cell, s] : report.ite) {
            ite << art.panel.unit_labels[cell.first - 1] << ',' << cell.second << ','
                << format_double(s.mean) << ',' << format_double(s.cri_lo) << ','
                << format_double(s.cri_hi) << ',' << format_double(s.p_positive) << "\n";
        }
        write_text_file(out_dir + "/ite_" + tag + ".csv", ite.str());
        std::cout << "estimates written for " << set.at("prior").get<std::string>()
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- cv

int cmd_cv(const std::string& panel_path, const std::string& config_path,
           const std::string& h_grid_text, int replicates, const std::string& out_dir,
           CliSeed seed, int threads, long cv_iterations, long cv_warmup) {
    PanelData panel = load_panel(panel_path);
    RunConfig config = load_config(config_path);

    CvOptions options;
    options.n_replicates = replicates;
    options.threads = threads;
    if (seed.set) options.seed = seed.value;
    else options.seed = config.mcmc.seed;
    if (cv_iterations > 0) options.mcmc.iterations = cv_iterations;
    if (cv_warmup > 0) options.mcmc.warmup = cv_warmup;
    options.mcmc.validate();

    options.h_grid.clear();
    int lo = 0, hi = 0;
    if (parse_window(h_grid_text, lo, hi) != 0 || lo < 0 || hi < lo) {
        throw ValidationError("bad --h-grid; expected lo:hi, e.g. 0:5");
    }
    for (int h = lo; h <= hi; ++h) options.h_grid.push_back(h);

    const CvResult result = run_cv(panel, config, options);
    ensure_dir(out_dir);

    std::ostringstream report;
    report << "metric";
    for (const auto& agg : result.aggregates) report << ",h=" << agg.h;
    report << "\nmspe";
    for (const auto& agg : result.aggregates) report << ',' << format_double(agg.mspe);
    report << "\ninterval_score";
    for (const auto& agg : result.aggregates) report << ',' << format_double(agg.is);
    report << "\nexcluded_fits";
    for (const auto& agg : result.aggregates) report << ',' << agg.n_excluded;
    report << "\n";
    write_text_file(out_dir + "/cv_report.csv", report.str());

    std::ostringstream cells;
    cells << "h,replicate,mspe,interval_score,max_rhat,converged\n";
    for (const auto& cell : result.cells) {
        cells << cell.h << ',' << cell.replicate << ',' << format_double(cell.mspe)
              << ',' << format_double(cell.is) << ',' << format_double(cell.max_rhat)
              << ',' << (cell.converged ? 1 : 0) << "\n";
    }
    write_text_file(out_dir + "/cv_cells.csv", cells.str());
    std::cout << "selected h = " << result.selected_h << "\n";
    return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& out_dir, int datasets, const std::string& modes_text,
                 CliSeed seed, int threads, int units, int times, int tmin,
                 long sim_iterations, long sim_warmup, double rho) {
    SimScenario scenario;
    if (datasets > 0) scenario.n_datasets = datasets;
    if (units > 0) scenario.n_units = units;
    if (times > 0) scenario.n_times = times;
    if (tmin > 0) scenario.t_min = tmin;
    scenario.rho_true = rho;
    if (sim_iterations > 0) scenario.mcmc.iterations = sim_iterations;
    if (sim_warmup > 0) scenario.mcmc.warmup = sim_warmup;
    scenario.mcmc.validate();

    std::vector<SimFitMode> modes;
    for (const auto& m : split(modes_text, ',')) {
        const std::string v = lower(trim(m));
        if (v == "full") modes.push_back(SimFitMode::Full);
        else if (v == "cut") modes.push_back(SimFitMode::Cut);
        else throw ValidationError("unknown simulation mode: '" + m + "'");
    }

    const std::uint64_t master = seed.set ? seed.value : 1;
    const SimReport report = run_study(scenario, modes, master, threads);
    ensure_dir(out_dir);

    std::ostringstream rows;
    rows << "dataset,mode,seed,tau_true,tau_hat,ci_lo,ci_hi,error,width,covered,converged\n";
    for (const auto& r : report.rows) {
        rows << r.dataset << ',' << to_string(r.mode) << ',' << r.seed << ','
             << r.tau_true << ',' << format_double(r.tau_hat) << ','
             << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ','
             << format_double(r.error) << ',' << format_double(r.width) << ','
             << (r.covered ? 1 : 0) << ',' << (r.converged ? 1 : 0) << "\n";
    }
    write_text_file(out_dir + "/sim_rows.csv", rows.str());

    std::ostringstream agg;
    agg << "mode,n_used,n_excluded,mean_error,error_mc_se,mean_width,coverage,coverage_se\n";
    for (const auto& a : report.aggregates) {
        agg << to_string(a.mode) << ',' << a.n_used << ',' << a.n_excluded << ','
            << format_double(a.mean_error) << ',' << format_double(a.error_mc_se) << ','
            << format_double(a.mean_width) << ',' << format_double(a.coverage) << ','
            << format_double(a.coverage_se) << "\n";
    }
    write_text_file(out_dir + "/sim_summary.csv", agg.str());

    std::ostringstream echo;
    echo << "dataset,lambda0,sigma_lambda,kappa0,sigma_kappa,theta,sigma_psi,delta0,delta1\n";
    for (std::size_t d = 0; d < report.hyperdraws.size(); ++d) {
        const auto& h = report.hyperdraws[d];
        echo << d << ',' << format_double(h.lambda0) << ',' << format_double(h.sigma_lambda)
             << ',' << format_double(h.kappa0) << ',' << format_double(h.sigma_kappa)
             << ',' << format_double(h.theta) << ',' << format_double(h.sigma_psi) << ','
             << format_double(h.delta0) << ',' << format_double(h.delta1) << "\n";
    }
    write_text_file(out_dir + "/scenario_echo.csv", echo.str());

    for (const auto& a : report.aggregates) {
        std::printf("%-4s coverage %.3f (se %.3f)  mean error %.2f (mc se %.2f)  width %.1f"
                    "  used %d excluded %d\n",
                    to_string(a.mode).c_str(), a.coverage, a.coverage_se, a.mean_error,
                    a.error_mc_se, a.mean_width, a.n_used, a.n_excluded);
    }
    return 0;
}

// ---------------------------------------------------------------- diagnose

int cmd_diagnose(const std::string& artifact_dir, const std::string& out_file) {
    const FitArtifact art = FitArtifact::open(artifact_dir);
    PosteriorDraws draws;
    draws.dim = art.layout.total;
    draws.n_chains = art.n_chains;
    draws.draws = art.rows;
    draws.lp = art.lp;
    draws.divergent = art.divergent;
    draws.chain_id = art.chain_id;
    draws.per_chain = art.n_chains > 0 ? art.n_draws() / art.n_chains : 0;
    const std::string report = diagnostics_report(draws, art.names);
    if (out_file.empty()) {
        std::cout << report;
    } else {
        write_text_file(out_file, report);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian causal factor analysis for count panels under "
                 "staggered ordinal interventions"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string panel_path, config_path, out_dir, artifact_dir, impute_dir;
    std::string mode, window, h_grid = "0:5", modes_text = "full,cut", out_file;
    std::vector<std::string> rho_args;
    CliSeed seed;
    int threads = 0, replicates = 50, datasets = 0, units = 0, times = 0, tmin = 0;
    long cv_iterations = 0, cv_warmup = 0, sim_iterations = 0, sim_warmup = 0;
    double rho_true = 1.0;

    std::uint64_t seed_value = 0;
    const auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_value, "Master seed (all stage randomness derives from it)")
            ->each([&](const std::string&) { seed.set = true; });
    };

    auto* fit = app.add_subcommand("fit", "Fit the model and write an artifact");
    fit->add_option("--panel", panel_path, "Long-format panel CSV")->required();
    fit->add_option("--config", config_path, "Run configuration file")->required();
    fit->add_option("--out", out_dir, "Artifact output directory")->required();
    fit->add_option("--mode", mode, "Override fit_mode (full|outcome_only|pre_intervention)");
    fit->add_option("--threads", threads, "Parallelism budget");
    add_seed(fit);

    auto* impute = app.add_subcommand("impute", "Impute untreated potential outcomes");
    impute->add_option("--artifact", artifact_dir, "Fit artifact directory")->required();
    impute->add_option("--rho", rho_args,
                       "Rho prior (repeatable), e.g. point:1 or uniform:-1,1");
    impute->add_option("--out", out_dir, "Output directory")->required();
    impute->add_option("--threads", threads, "Parallelism budget");
    add_seed(impute);

    auto* estimate = app.add_subcommand("estimate", "Compute estimand reports");
    estimate->add_option("--impute", impute_dir, "Imputation output directory")->required();
    estimate->add_option("--out", out_dir, "Output directory")->required();
    estimate->add_option("--window", window, "Override lockdown window t0:t1");

    auto* cv = app.add_subcommand("cv", "Cross-validate the number of factors");
    cv->add_option("--panel", panel_path, "Long-format panel CSV")->required();
    cv->add_option("--config", config_path, "Run configuration file")->required();
    cv->add_option("--h-grid", h_grid, "Factor grid lo:hi (default 0:5)");
    cv->add_option("--replicates", replicates, "CV replicate datasets (default 50)");
    cv->add_option("--out", out_dir, "Output directory")->required();
    cv->add_option("--threads", threads, "Parallelism budget");
    cv->add_option("--cv-iterations", cv_iterations, "Per-fold MCMC iterations");
    cv->add_option("--cv-warmup", cv_warmup, "Per-fold MCMC warmup");
    add_seed(cv);

    auto* simulate = app.add_subcommand("simulate", "Run the coverage study");
    simulate->add_option("--out", out_dir, "Output directory")->required();
    simulate->add_option("--datasets", datasets, "Number of synthetic datasets");
    simulate->add_option("--modes", modes_text, "Comma list of full,cut");
    simulate->add_option("--threads", threads, "Parallelism budget");
    simulate->add_option("--units", units, "Units per dataset");
    simulate->add_option("--times", times, "Periods per dataset");
    simulate->add_option("--tmin", tmin, "Earliest possible exposure");
    simulate->add_option("--rho", rho_true, "True copula correlation");
    simulate->add_option("--sim-iterations", sim_iterations, "Per-fit MCMC iterations");
    simulate->add_option("--sim-warmup", sim_warmup, "Per-fit MCMC warmup");
    add_seed(simulate);

    auto* diagnose = app.add_subcommand("diagnose", "Print the convergence report");
    diagnose->add_option("--artifact", artifact_dir, "Fit artifact directory")->required();
    diagnose->add_option("--out", out_file, "Write the report here instead of stdout");

    try {
        app.parse(argc, argv);
        seed.value = seed_value;
        if (fit->parsed()) {
            return cmd_fit(panel_path, config_path, out_dir, mode, seed, threads);
        }
        if (impute->parsed()) {
            return cmd_impute(artifact_dir, rho_args, out_dir, seed, threads);
        }
        if (estimate->parsed()) return cmd_estimate(impute_dir, out_dir, window);
        if (cv->parsed()) {
            return cmd_cv(panel_path, config_path, h_grid, replicates, out_dir, seed,
                          threads, cv_iterations, cv_warmup);
        }
        if (simulate->parsed()) {
            return cmd_simulate(out_dir, datasets, modes_text, seed, threads, units,
                                times, tmin, sim_iterations, sim_warmup, rho_true);
        }
        if (diagnose->parsed()) return cmd_diagnose(artifact_dir, out_file);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        app.exit(e);
        std::cerr << "error: validation: bad command line\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: non-convergence: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
