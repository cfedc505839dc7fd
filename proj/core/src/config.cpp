#include "bcpanel/config.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "bcpanel/errors.hpp"
#include "bcpanel/panel.hpp"
#include "bcpanel/textio.hpp"

namespace bcpanel {

std::string to_string(FitMode mode) {
    switch (mode) {
        case FitMode::Full: return "full";
        case FitMode::OutcomeOnly: return "outcome_only";
        case FitMode::PreIntervention: return "pre_intervention";
    }
    return "full";
}

FitMode fit_mode_from_string(const std::string& s) {
    const std::string v = lower(trim(s));
    if (v == "full") return FitMode::Full;
    if (v == "outcome_only") return FitMode::OutcomeOnly;
    if (v == "pre_intervention") return FitMode::PreIntervention;
    throw ValidationError("unknown fit_mode: '" + s + "'");
}

std::string RhoPrior::str() const {
    if (kind == Kind::Point) return "point:" + format_double(value);
    return "uniform:" + format_double(lo) + "," + format_double(hi);
}

RhoPrior RhoPrior::parse(const std::string& text) {
    const std::string t = trim(text);
    const auto colon = t.find(':');
    if (colon == std::string::npos) {
        throw ValidationError("rho_prior must look like 'point:0' or 'uniform:-1,1'");
    }
    const std::string kind = lower(trim(t.substr(0, colon)));
    const std::string args = t.substr(colon + 1);
    RhoPrior prior;
    if (kind == "point") {
        const auto v = parse_double(args);
        if (!v || *v < -1.0 || *v > 1.0) {
            throw ValidationError("rho point mass must lie in [-1, 1]");
        }
        prior.kind = Kind::Point;
        prior.value = *v;
    } else if (kind == "uniform") {
        const auto parts = split(args, ',');
        if (parts.size() != 2) {
            throw ValidationError("uniform rho prior needs two bounds, e.g. uniform:-1,1");
        }
        const auto lo = parse_double(parts[0]);
        const auto hi = parse_double(parts[1]);
        if (!lo || !hi || *lo < -1.0 || *hi > 1.0 || !(*lo < *hi)) {
            throw ValidationError("uniform rho bounds must satisfy -1 <= lo < hi <= 1");
        }
        prior.kind = Kind::Uniform;
        prior.lo = *lo;
        prior.hi = *hi;
    } else {
        throw ValidationError("unknown rho prior kind: '" + kind + "'");
    }
    return prior;
}

void McmcConfig::validate() const {
    if (chains < 1) throw ValidationError("mcmc: chains must be >= 1");
    if (iterations <= 0) throw ValidationError("mcmc: iterations must be > 0");
    if (warmup < 0 || warmup >= iterations) {
        throw ValidationError("mcmc: warmup must satisfy 0 <= warmup < iterations");
    }
    if (thin < 1) throw ValidationError("mcmc: thin must be >= 1");
    if (retained_per_chain() < 1) {
        throw ValidationError("mcmc: no draws retained after warmup/thinning");
    }
    if (!(target_accept > 0.0 && target_accept < 1.0)) {
        throw ValidationError("mcmc: target_accept must lie in (0, 1)");
    }
    if (max_tree_depth < 1 || max_tree_depth > 14) {
        throw ValidationError("mcmc: max_tree_depth must lie in [1, 14]");
    }
}

void RunConfig::validate() const {
    if (n_factors < 0) throw ValidationError("n_factors must be >= 0");
    if (spline_degree < 1) throw ValidationError("spline_degree must be >= 1");
    if (n_interior_knots < 0) throw ValidationError("n_interior_knots must be >= 0");
    if (lockdown_start < 1 || lockdown_end < lockdown_start) {
        throw ValidationError("inconsistent lockdown window: need 1 <= start <= end");
    }
    if (t_min < 0) throw ValidationError("t_min must be >= 0 (0 = derive from data)");
    if (priors.kappa_var <= 0 || priors.scalar_var <= 0 || priors.vector_var <= 0) {
        throw ValidationError("prior variances must be positive");
    }
    if (priors.sigma0 < 0 || priors.sigma1 < 0 || priors.sd_multiplier <= 0) {
        throw ValidationError("prior scales must be positive");
    }
    mcmc.validate();
}

void RunConfig::resolve_against(const PanelData& panel) {
    validate();
    if (lockdown_end > panel.n_times) {
        throw ValidationError("lockdown window extends past the panel");
    }
    int earliest = panel.n_times + 1;
    for (int g : panel.first_exposure) earliest = std::min(earliest, g);
    if (t_min == 0) {
        t_min = earliest; // no exposed units leaves t_min = T+1: no assignment terms
    } else if (t_min > earliest) {
        throw ValidationError("t_min is later than an observed first exposure");
    }
}

namespace {

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> parse_ini(const std::string& text) {
    std::map<std::string, Section> sections;
    std::istringstream in(text);
    std::string line;
    std::string current = "";
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ValidationError("config line " + std::to_string(lineno) +
                                      ": malformed section header");
            }
            current = lower(trim(line.substr(1, line.size() - 2)));
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
        }
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (!sections[current].emplace(key, value).second) {
            throw ValidationError("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
        }
    }
    return sections;
}

class SectionReader {
public:
    SectionReader(const std::string& name, const Section* section)
        : name_(name), section_(section) {}

    template <typename T, typename Parse>
    void get(const std::string& key, T& out, Parse parse) {
        if (!section_) return;
        const auto it = section_->find(key);
        if (it == section_->end()) return;
        seen_.push_back(key);
        auto v = parse(it->second);
        if (!v) {
            throw ValidationError("config [" + name_ + "] " + key + ": bad value '" +
                                  it->second + "'");
        }
        out = *v;
    }

    void check_unknown() const {
        if (!section_) return;
        for (const auto& [key, value] : *section_) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
                throw ValidationError("config [" + name_ + "]: unknown key '" + key + "'");
            }
        }
    }

private:
    std::string name_;
    const Section* section_;
    std::vector<std::string> seen_;
};

std::optional<int> parse_int(const std::string& s) {
    const auto v = parse_long(s);
    if (!v) return std::nullopt;
    return static_cast<int>(*v);
}

} // namespace

RunConfig load_config(const std::string& path) {
    const auto sections = parse_ini(read_text_file(path));
    for (const auto& [name, section] : sections) {
        if (name != "" && name != "model" && name != "mcmc" && name != "priors" &&
            name != "copula") {
            throw ValidationError("config: unknown section [" + name + "]");
        }
        if (name == "" && !section.empty()) {
            throw ValidationError("config: keys must appear inside a section");
        }
    }
    const auto find = [&](const char* name) -> const Section* {
        const auto it = sections.find(name);
        return it == sections.end() ? nullptr : &it->second;
    };

    RunConfig cfg;

    SectionReader model("model", find("model"));
    model.get("n_factors", cfg.n_factors, parse_int);
    model.get("spline_degree", cfg.spline_degree, parse_int);
    model.get("n_interior_knots", cfg.n_interior_knots, parse_int);
    model.get("lockdown_start", cfg.lockdown_start, parse_int);
    model.get("lockdown_end", cfg.lockdown_end, parse_int);
    model.get("t_min", cfg.t_min, parse_int);
    model.get("fit_mode", cfg.fit_mode, [](const std::string& s) {
        return std::optional<FitMode>(fit_mode_from_string(s));
    });
    model.check_unknown();

    SectionReader mcmc("mcmc", find("mcmc"));
    mcmc.get("chains", cfg.mcmc.chains, parse_int);
    mcmc.get("iterations", cfg.mcmc.iterations, parse_long);
    mcmc.get("warmup", cfg.mcmc.warmup, parse_long);
    mcmc.get("thin", cfg.mcmc.thin, parse_int);
    mcmc.get("target_accept", cfg.mcmc.target_accept, parse_double);
    mcmc.get("max_tree_depth", cfg.mcmc.max_tree_depth, parse_int);
    mcmc.get("seed", cfg.mcmc.seed, parse_u64);
    mcmc.check_unknown();

    const auto parse_sigma = [](const std::string& s) -> std::optional<double> {
        if (lower(trim(s)) == "auto") return 0.0;
        return parse_double(s);
    };
    SectionReader priors("priors", find("priors"));
    priors.get("kappa_var", cfg.priors.kappa_var, parse_double);
    priors.get("scalar_var", cfg.priors.scalar_var, parse_double);
    priors.get("vector_var", cfg.priors.vector_var, parse_double);
    priors.get("sigma0", cfg.priors.sigma0, parse_sigma);
    priors.get("sigma1", cfg.priors.sigma1, parse_sigma);
    priors.get("sd_multiplier", cfg.priors.sd_multiplier, parse_double);
    priors.check_unknown();

    SectionReader copula("copula", find("copula"));
    copula.get("rho_prior", cfg.rho_prior, [](const std::string& s) {
        return std::optional<RhoPrior>(RhoPrior::parse(s));
    });
    copula.check_unknown();

    cfg.validate();
    return cfg;
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "[model]\n";
    out << "n_factors = " << cfg.n_factors << "\n";
    out << "spline_degree = " << cfg.spline_degree << "\n";
    out << "n_interior_knots = " << cfg.n_interior_knots << "\n";
    out << "lockdown_start = " << cfg.lockdown_start << "\n";
    out << "lockdown_end = " << cfg.lockdown_end << "\n";
    out << "t_min = " << cfg.t_min << "\n";
    out << "fit_mode = " << to_string(cfg.fit_mode) << "\n";
    out << "\n[mcmc]\n";
    out << "chains = " << cfg.mcmc.chains << "\n";
    out << "iterations = " << cfg.mcmc.iterations << "\n";
    out << "warmup = " << cfg.mcmc.warmup << "\n";
    out << "thin = " << cfg.mcmc.thin << "\n";
    out << "target_accept = " << format_double(cfg.mcmc.target_accept) << "\n";
    out << "max_tree_depth = " << cfg.mcmc.max_tree_depth << "\n";
    out << "seed = " << cfg.mcmc.seed << "\n";
    out << "\n[priors]\n";
    out << "kappa_var = " << format_double(cfg.priors.kappa_var) << "\n";
    out << "scalar_var = " << format_double(cfg.priors.scalar_var) << "\n";
    out << "vector_var = " << format_double(cfg.priors.vector_var) << "\n";
    out << "sigma0 = " << (cfg.priors.sigma0 == 0.0 ? "auto" : format_double(cfg.priors.sigma0)) << "\n";
    out << "sigma1 = " << (cfg.priors.sigma1 == 0.0 ? "auto" : format_double(cfg.priors.sigma1)) << "\n";
    out << "sd_multiplier = " << format_double(cfg.priors.sd_multiplier) << "\n";
    out << "\n[copula]\n";
    out << "rho_prior = " << cfg.rho_prior.str() << "\n";
    return out.str();
}

void write_config(const RunConfig& config, const std::string& path) {
    write_text_file(path, config_to_text(config));
}

} // namespace bcpanel
