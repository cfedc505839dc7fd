#include "bcpanel/panel.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "bcpanel/errors.hpp"
#include "bcpanel/textio.hpp"

namespace bcpanel {

double PanelData::cum_exposure(int i, int t) const {
    double c = 0.0;
    for (int s = 0; s < t; ++s) c += static_cast<double>(a_at(i, s));
    return c;
}

long PanelData::increments(int i, int t) const {
    const long prev = t >= 2 ? a_at(i, t - 2) : 0;
    return a_at(i, t - 1) - prev;
}

int PanelData::n_exposed_cells() const {
    int n = 0;
    for (int i = 0; i < n_units; ++i) {
        n += std::max(0, n_times - first_exposure[i] + 1);
    }
    return n;
}

std::vector<std::pair<int, int>> PanelData::exposed_cells() const {
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < n_units; ++i) {
        for (int t = first_exposure[i]; t <= n_times; ++t) {
            cells.emplace_back(i + 1, t);
        }
    }
    return cells;
}

void PanelData::derive_first_exposure() {
    first_exposure.assign(n_units, n_times + 1);
    for (int i = 0; i < n_units; ++i) {
        long prev = 0;
        for (int t = 0; t < n_times; ++t) {
            const long cur = a_at(i, t);
            if (cur < prev) {
                throw ValidationError("non-decreasing intensity violated for unit '" +
                                      unit_labels[i] + "' at time " +
                                      std::to_string(t + 1));
            }
            if (cur > 0 && first_exposure[i] == n_times + 1) {
                first_exposure[i] = t + 1;
            }
            prev = cur;
        }
    }
}

void PanelData::validate() const {
    if (n_units <= 0 || n_times <= 0) throw ValidationError("empty panel");
    const std::size_t cells = static_cast<std::size_t>(n_units) * n_times;
    if (y.size() != cells || a.size() != cells) {
        throw ValidationError("panel matrices do not match N x T");
    }
    if (x.size() != cells * static_cast<std::size_t>(n_covariates)) {
        throw ValidationError("covariate block does not match N x T x K");
    }
    if (unit_labels.size() != static_cast<std::size_t>(n_units) ||
        time_labels.size() != static_cast<std::size_t>(n_times)) {
        throw ValidationError("label vectors do not match panel dimensions");
    }
    for (long v : y) {
        if (v < 0) throw ValidationError("negative outcome count");
    }
    for (long v : a) {
        if (v < 0) throw ValidationError("negative intervention intensity");
    }
    PanelData copy = *this;
    copy.derive_first_exposure();
    if (copy.first_exposure != first_exposure) {
        throw ValidationError("stored first-exposure times do not match data");
    }
}

PanelData load_panel(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 4 || table.header[0] != "unit" ||
        table.header[1] != "time" || table.header[2] != "y" ||
        table.header[3] != "a") {
        throw ValidationError("panel CSV must start with header unit,time,y,a");
    }
    const int n_cov = static_cast<int>(table.header.size()) - 4;

    struct Row {
        long time;
        long y;
        long a;
        std::vector<double> x;
    };
    std::vector<std::string> unit_order;
    std::map<std::string, std::map<long, Row>> grid;
    long t_max = 0;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        const std::string where = " (row " + std::to_string(r + 2) + ")";
        if (fields.size() != table.header.size()) {
            throw ValidationError("ragged covariates: wrong field count" + where);
        }
        const std::string unit = trim(fields[0]);
        if (unit.empty()) throw ValidationError("empty unit label" + where);
        if (unit.find(',') != std::string::npos) {
            throw ValidationError("unit labels may not contain commas" + where);
        }
        const auto time = parse_long(fields[1]);
        if (!time || *time < 1) throw ValidationError("time must be a positive integer" + where);
        const auto yv = parse_long(fields[2]);
        if (!yv || *yv < 0) throw ValidationError("non-integer y" + where);
        const auto av = parse_long(fields[3]);
        if (!av || *av < 0) throw ValidationError("non-integer a" + where);
        Row row{*time, *yv, *av, {}};
        row.x.reserve(n_cov);
        for (int k = 0; k < n_cov; ++k) {
            const auto xv = parse_double(fields[4 + k]);
            if (!xv) throw ValidationError("ragged covariates: bad value" + where);
            row.x.push_back(*xv);
        }
        auto it = grid.find(unit);
        if (it == grid.end()) {
            unit_order.push_back(unit);
            it = grid.emplace(unit, std::map<long, Row>{}).first;
        }
        if (!it->second.emplace(*time, std::move(row)).second) {
            throw ValidationError("duplicate cell for unit '" + unit + "'" + where);
        }
        t_max = std::max(t_max, *time);
    }
    if (grid.empty()) throw ValidationError("panel CSV has no data rows");

    PanelData panel;
    panel.n_units = static_cast<int>(unit_order.size());
    panel.n_times = static_cast<int>(t_max);
    panel.n_covariates = n_cov;
    panel.unit_labels = unit_order;
    for (long t = 1; t <= t_max; ++t) panel.time_labels.push_back(std::to_string(t));
    panel.y.reserve(grid.size() * t_max);
    panel.a.reserve(grid.size() * t_max);
    panel.x.reserve(grid.size() * t_max * n_cov);
    for (const auto& unit : unit_order) {
        const auto& rows = grid[unit];
        for (long t = 1; t <= t_max; ++t) {
            const auto it = rows.find(t);
            if (it == rows.end()) {
                throw ValidationError("missing cell: unit '" + unit + "', time " +
                                      std::to_string(t));
            }
            panel.y.push_back(it->second.y);
            panel.a.push_back(it->second.a);
            panel.x.insert(panel.x.end(), it->second.x.begin(), it->second.x.end());
        }
    }
    panel.derive_first_exposure();
    return panel;
}

void write_panel(const PanelData& panel, const std::string& path) {
    std::ostringstream out;
    out << "unit,time,y,a";
    for (int k = 0; k < panel.n_covariates; ++k) out << ",x" << (k + 1);
    out << "\n";
    for (int i = 0; i < panel.n_units; ++i) {
        for (int t = 1; t <= panel.n_times; ++t) {
            out << panel.unit_labels[i] << ',' << t << ',' << panel.y_at(i, t - 1)
                << ',' << panel.a_at(i, t - 1);
            for (int k = 0; k < panel.n_covariates; ++k) {
                out << ',' << format_double(panel.x_at(i, t - 1, k));
            }
            out << "\n";
        }
    }
    write_text_file(path, out.str());
}

} // namespace bcpanel
