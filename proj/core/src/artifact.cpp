#include "bcpanel/artifact.hpp"

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "bcpanel/errors.hpp"
#include "bcpanel/textio.hpp"
#include "bcpanel/version.hpp"

namespace bcpanel {

namespace fs = std::filesystem;
using nlohmann::json;

double FitArtifact::divergence_rate() const {
    if (divergent.empty()) return 0.0;
    long n = 0;
    for (auto d : divergent) n += d;
    return static_cast<double>(n) / static_cast<double>(divergent.size());
}

SplineBasis basis_for(const PanelData& panel, const RunConfig& config) {
    std::vector<double> exposures;
    for (int i = 0; i < panel.n_units; ++i) {
        for (int t = panel.first_exposure[i]; t <= panel.n_times; ++t) {
            exposures.push_back(panel.cum_exposure(i, t));
        }
    }
    if (exposures.empty()) {
        // Control-only panel (pre-intervention use): a fixed unit-interval
        // basis keeps the artifact well-formed.
        SplineBasis basis;
        basis.degree = config.spline_degree;
        basis.lo = 0.0;
        basis.hi = 1.0;
        for (int j = 1; j <= config.n_interior_knots; ++j) {
            basis.interior_knots.push_back(static_cast<double>(j) /
                                           (config.n_interior_knots + 1));
        }
        return basis;
    }
    return SplineBasis::build(std::move(exposures), config.spline_degree,
                              config.n_interior_knots);
}

namespace {

std::string draws_csv(const PanelModel& model, const PosteriorDraws& draws) {
    std::ostringstream out;
    out << "chain,draw,lp,divergent";
    for (const auto& name : model.layout().constrained_names()) out << ',' << name;
    out << "\n";
    std::vector<double> constrained(model.layout().total);
    long within = 0;
    int last_chain = -1;
    for (long d = 0; d < draws.n_rows(); ++d) {
        if (draws.chain_id[d] != last_chain) {
            last_chain = draws.chain_id[d];
            within = 0;
        }
        model.constrain(draws.row(d), constrained);
        out << (draws.chain_id[d] + 1) << ',' << (++within) << ','
            << format_double(draws.lp[d]) << ',' << int(draws.divergent[d]);
        for (double v : constrained) out << ',' << format_double(v);
        out << "\n";
    }
    return out.str();
}

json basis_json(const SplineBasis& basis) {
    json j;
    j["degree"] = basis.degree;
    j["lo"] = basis.lo;
    j["hi"] = basis.hi;
    j["interior_knots"] = basis.interior_knots;
    return j;
}

SplineBasis basis_from_json(const json& j) {
    SplineBasis basis;
    basis.degree = j.at("degree").get<int>();
    basis.lo = j.at("lo").get<double>();
    basis.hi = j.at("hi").get<double>();
    basis.interior_knots = j.at("interior_knots").get<std::vector<double>>();
    return basis;
}

} // namespace

void save_artifact(const std::string& dir, const PanelData& panel,
                   const RunConfig& config, const SplineBasis& basis,
                   const PanelModel& model, const PosteriorDraws& draws) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);

    json meta;
    meta["artifact_format"] = kArtifactFormatVersion;
    meta["bcpanel_version"] = kVersion;
    meta["fit_mode"] = to_string(config.fit_mode);
    meta["seed"] = config.mcmc.seed;
    meta["n_units"] = panel.n_units;
    meta["n_times"] = panel.n_times;
    meta["n_factors"] = config.n_factors;
    meta["n_covariates"] = panel.n_covariates;
    meta["n_basis"] = basis.n_basis();
    meta["n_chains"] = draws.n_chains;
    meta["draws_per_chain"] = draws.per_chain;
    write_text_file(dir + "/meta.json", meta.dump(2) + "\n");

    write_panel(panel, dir + "/panel.csv");
    write_config(config, dir + "/config.ini");
    write_text_file(dir + "/basis.json", basis_json(basis).dump(2) + "\n");
    write_text_file(dir + "/draws.csv", draws_csv(model, draws));
    write_text_file(dir + "/diagnostics.txt",
                    diagnostics_report(draws, model.layout().constrained_names()));
}

FitArtifact write_fit_artifact(const std::string& dir, const PanelData& panel,
                               const RunConfig& config, int threads) {
    RunConfig resolved = config;
    resolved.resolve_against(panel);
    const SplineBasis basis = basis_for(panel, resolved);
    const PriorSpec priors = PriorSpec::resolve(resolved.priors, panel);
    PanelModel model(panel, resolved, basis, priors);
    const PosteriorDraws draws = run_chains(model, SamplerConfig::from(resolved.mcmc, threads));
    save_artifact(dir, panel, resolved, basis, model, draws);
    return FitArtifact::open(dir);
}

FitArtifact FitArtifact::open(const std::string& dir) {
    if (!fs::exists(dir + "/meta.json")) {
        throw IoError("not a fit artifact (missing meta.json): " + dir);
    }
    json meta;
    try {
        meta = json::parse(read_text_file(dir + "/meta.json"));
    } catch (const json::exception& e) {
        throw IoError("corrupt meta.json in " + dir + ": " + e.what());
    }
    const int format = meta.value("artifact_format", -1);
    if (format != kArtifactFormatVersion) {
        throw IoError("artifact format version " + std::to_string(format) +
                      " does not match this build (" +
                      std::to_string(kArtifactFormatVersion) + "): " + dir);
    }

    FitArtifact art;
    art.panel = load_panel(dir + "/panel.csv");
    art.config = load_config(dir + "/config.ini");
    art.config.resolve_against(art.panel);
    try {
        art.basis = basis_from_json(json::parse(read_text_file(dir + "/basis.json")));
    } catch (const json::exception& e) {
        throw IoError("corrupt basis.json in " + dir + ": " + e.what());
    }
    art.layout = ParamLayout::create(art.panel.n_units, art.panel.n_times,
                                     art.config.n_factors, art.panel.n_covariates,
                                     art.basis.n_basis(), art.config.fit_mode);
    art.names = art.layout.constrained_names();

    const CsvTable table = read_csv(dir + "/draws.csv");
    const std::vector<std::string> expected_prefix = {"chain", "draw", "lp", "divergent"};
    if (table.header.size() != expected_prefix.size() + art.names.size()) {
        throw IoError("draws.csv does not match the parameter layout: " + dir);
    }
    for (std::size_t j = 0; j < expected_prefix.size(); ++j) {
        if (table.header[j] != expected_prefix[j]) {
            throw IoError("draws.csv has an unexpected header: " + dir);
        }
    }
    for (std::size_t j = 0; j < art.names.size(); ++j) {
        if (table.header[4 + j] != art.names[j]) {
            throw IoError("draws.csv column '" + table.header[4 + j] +
                          "' does not match layout column '" + art.names[j] + "'");
        }
    }
    art.rows.reserve(table.rows.size() * art.names.size());
    int max_chain = 0;
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw IoError("draws.csv has a ragged row: " + dir);
        }
        const auto chain = parse_long(row[0]);
        const auto lp = parse_double(row[2]);
        const auto div = parse_long(row[3]);
        if (!chain || !lp || !div) throw IoError("draws.csv has a bad row: " + dir);
        art.chain_id.push_back(static_cast<int>(*chain) - 1);
        max_chain = std::max(max_chain, static_cast<int>(*chain));
        art.lp.push_back(*lp);
        art.divergent.push_back(*div != 0 ? 1 : 0);
        for (std::size_t j = 0; j < art.names.size(); ++j) {
            const auto v = parse_double(row[4 + j]);
            if (!v) throw IoError("draws.csv has a bad value: " + dir);
            art.rows.push_back(*v);
        }
    }
    if (art.rows.empty()) throw IoError("draws.csv holds no draws: " + dir);
    art.n_chains = max_chain;
    return art;
}

} // namespace bcpanel
