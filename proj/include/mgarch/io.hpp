#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/estimate.hpp"
#include "mgarch/linalg.hpp"
#include "mgarch/panel.hpp"
#include "mgarch/theta.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace mgarch::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Long CSV: header `time,row,col,value`, one line per cell, 1-based row/col.

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(b, e - b + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) {
        out.push_back(trim(cur));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

inline bool parse_index(const std::string& s, long& out) {
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    errno = 0;
    out = std::strtol(s.c_str(), &end, 10);
    return end == s.c_str() + s.size() && errno != ERANGE;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Reads a long-format panel. Times may be numeric (sorted numerically) or text (sorted
/// lexicographically, which orders ISO dates). Errors cite line numbers or the missing cell.
inline MatrixPanel read_panel_csv(std::istream& in, bool demean = false) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw data_error("panel CSV: empty input");
    }
    ++lineno;
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
        line = line.substr(3);  // UTF-8 BOM
    }
    const std::vector<std::string> header = detail::split(line);
    if (header != std::vector<std::string>{"time", "row", "col", "value"}) {
        throw data_error("panel CSV line 1: header must be `time,row,col,value`");
    }
    struct Cell {
        long row;
        long col;
        double value;
        std::size_t line;
    };
    std::map<std::string, std::vector<Cell>> by_time;
    long m = 0;
    long n = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) {
            continue;
        }
        const std::vector<std::string> f = detail::split(line);
        const std::string where = "panel CSV line " + std::to_string(lineno) + ": ";
        if (f.size() != 4) {
            throw data_error(where + "expected 4 fields, found " + std::to_string(f.size()));
        }
        long r = 0;
        long c = 0;
        double v = 0.0;
        if (f[0].empty()) {
            throw data_error(where + "empty time");
        }
        if (!detail::parse_index(f[1], r) || r < 1) {
            throw data_error(where + "row must be a positive integer, got '" + f[1] + "'");
        }
        if (!detail::parse_index(f[2], c) || c < 1) {
            throw data_error(where + "col must be a positive integer, got '" + f[2] + "'");
        }
        if (!detail::parse_double(f[3], v)) {
            throw data_error(where + "non-numeric value '" + f[3] + "'");
        }
        by_time[f[0]].push_back({r, c, v, lineno});
        m = std::max(m, r);
        n = std::max(n, c);
    }
    if (by_time.empty()) {
        throw data_error("panel CSV: no data rows");
    }
    std::vector<std::string> times;
    times.reserve(by_time.size());
    bool numeric = true;
    for (const auto& [t, cells] : by_time) {
        times.push_back(t);
        double tmp = 0.0;
        numeric = numeric && detail::parse_double(t, tmp);
    }
    if (numeric) {
        std::sort(times.begin(), times.end(), [](const std::string& a, const std::string& b) {
            return std::strtod(a.c_str(), nullptr) < std::strtod(b.c_str(), nullptr);
        });
    }
    std::vector<Matrix> data;
    data.reserve(times.size());
    for (const auto& t : times) {
        const auto& cells = by_time.at(t);
        Matrix x(m, n);
        std::vector<std::size_t> seen(static_cast<std::size_t>(m * n), 0);
        for (const Cell& cell : cells) {
            const auto k = static_cast<std::size_t>((cell.col - 1) * m + (cell.row - 1));
            if (seen[k] != 0) {
                throw data_error("panel CSV line " + std::to_string(cell.line) + ": duplicate cell (time=" + t +
                                 ", row=" + std::to_string(cell.row) + ", col=" + std::to_string(cell.col) +
                                 "), first given on line " + std::to_string(seen[k]));
            }
            seen[k] = cell.line;
            x(cell.row - 1, cell.col - 1) = cell.value;
        }
        for (long c = 1; c <= n; ++c) {
            for (long r = 1; r <= m; ++r) {
                if (seen[static_cast<std::size_t>((c - 1) * m + (r - 1))] == 0) {
                    throw data_error("panel CSV: missing cell (time=" + t + ", row=" + std::to_string(r) +
                                     ", col=" + std::to_string(c) + "); time " + t + " has " +
                                     std::to_string(cells.size()) + " of " + std::to_string(m * n) + " cells");
                }
            }
        }
        data.push_back(std::move(x));
    }
    MatrixPanel panel(std::move(data), times);
    return demean ? panel.demeaned() : panel;
}

inline MatrixPanel load_panel(const std::string& path, bool demean = false) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open panel file '" + path + "'");
    }
    return read_panel_csv(in, demean);
}

inline void write_panel_csv(std::ostream& out, const MatrixPanel& panel) {
    out << "time,row,col,value\n";
    const auto& labels = panel.time_labels();
    for (std::size_t t = 0; t < panel.size(); ++t) {
        const std::string label = labels.empty() ? std::to_string(t + 1) : labels[t];
        const Matrix& x = panel[t];
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                out << label << ',' << (r + 1) << ',' << (c + 1) << ',' << detail::format_double(x(r, c)) << '\n';
            }
        }
    }
}

inline void save_panel(const std::string& path, const MatrixPanel& panel) {
    std::ofstream out(path);
    if (!out) {
        throw data_error("cannot write panel file '" + path + "'");
    }
    write_panel_csv(out, panel);
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Matrix& a) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            row.push_back(std::isfinite(a(r, c)) ? json(a(r, c)) : json(nullptr));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
    }
    return out;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw invalid_input(what + ": expected a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix a(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw invalid_input(what + ": ragged matrix");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) {
                throw invalid_input(what + ": non-numeric entry");
            }
            a(r, c) = v.get<double>();
        }
    }
    return a;
}

inline json side_to_json(const SideParams& s) {
    json j;
    j["A0"] = to_json(s.A0);
    j["arch"] = json::array();
    j["garch"] = json::array();
    for (const auto& a : s.arch) {
        j["arch"].push_back(to_json(a));
    }
    for (const auto& g : s.garch) {
        j["garch"].push_back(to_json(g));
    }
    return j;
}

inline json theta_to_json(const Theta& th) {
    json j;
    j["m"] = th.m();
    j["n"] = th.n();
    j["structure"] = to_string(th.row.structure);
    j["order"] = {{"arch", th.order().arch}, {"garch", th.order().garch}};
    j["w"] = th.trace.w;
    j["alpha"] = th.trace.alpha;
    j["beta"] = th.trace.beta;
    j["row"] = side_to_json(th.row);
    j["col"] = side_to_json(th.col);
    return j;
}

inline SideParams side_from_json(const json& j, Structure s, const std::string& what) {
    SideParams sp;
    sp.structure = s;
    sp.A0 = matrix_from_json(j.at("A0"), what + ".A0");
    sp.dim = sp.A0.rows();
    sp.arch.clear();
    sp.garch.clear();
    for (const auto& a : j.at("arch")) {
        sp.arch.push_back(matrix_from_json(a, what + ".arch"));
    }
    for (const auto& g : j.at("garch")) {
        sp.garch.push_back(matrix_from_json(g, what + ".garch"));
    }
    return sp;
}

/// Accepts the object written by theta_to_json (or a fit file carrying it under "theta").
inline Theta theta_from_json(const json& in) {
    const json& j = in.contains("theta") ? in.at("theta") : in;
    try {
        Theta th;
        const Structure s = structure_from_string(j.at("structure").get<std::string>());
        th.trace.w = j.at("w").get<double>();
        th.trace.alpha = j.at("alpha").get<std::vector<double>>();
        th.trace.beta = j.at("beta").get<std::vector<double>>();
        th.row = side_from_json(j.at("row"), s, "row");
        th.col = side_from_json(j.at("col"), s, "col");
        validate(th);
        return th;
    } catch (const json::exception& e) {
        throw invalid_input(std::string("theta JSON: ") + e.what());
    }
}

inline json fit_to_json(const FitResult& f) {
    const ThetaShape shape = ThetaShape::of(f.theta_hat);
    json j;
    j["theta"] = theta_to_json(f.theta_hat);
    j["neg_loglik"] = f.neg_loglik;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["multistart_best_of"] = f.multistart_best_of;
    j["gradient_norm"] = f.gradient_norm;
    j["boundary"] = f.boundary;
    j["T"] = f.T;
    j["param_names"] = param_names(shape);
    j["estimates"] = to_json(to_natural(f.theta_hat));
    j["std_errors"] = to_json(f.std_errors);
    j["active"] = f.active;
    j["has_sandwich"] = f.has_sandwich;
    if (f.has_sandwich) {
        j["avar"] = to_json(f.avar);
        j["C0_hat"] = to_json(f.C0_hat);
        j["C1_hat"] = to_json(f.C1_hat);
    } else {
        j["sandwich_error"] = f.sandwich_error;
    }
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw invalid_input("cannot open JSON file '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw invalid_input("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw data_error("cannot write '" + path + "'");
    }
    out << text;
}

}  // namespace mgarch::io
