#pragma once

// CSV and key = value config parsing, exact round-trip number output, JSON
// reports and the SVG heatmap.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "simbench.hpp"
#include "tuning.hpp"

namespace bicoclust {

/// Input problem reported with its 1-based line and column; column 0 means
/// the whole line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& message)
        : std::runtime_error(source + ":" + std::to_string(line) + (column ? ":" + std::to_string(column) : "") +
                             ": " + message),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::string unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return std::string(s);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            cur.push_back(c);
        } else if (c == ',' && !quoted) {
            cells.push_back(unquote(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(unquote(cur));
    return cells;
}

inline bool is_missing_token(const std::string& s) {
    if (s.empty()) {
        return true;
    }
    if (s.size() != 2) {
        return false;
    }
    return (s[0] == 'N' || s[0] == 'n') && (s[1] == 'A' || s[1] == 'a');
}

inline bool parse_number(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

inline bool is_numeric_or_missing(const std::string& s) {
    double v = 0.0;
    return is_missing_token(s) || parse_number(s, v);
}

}  // namespace detail

struct CsvTable {
    Matrix values;
    BoolMatrix observed;
    std::vector<std::string> col_names;  // empty when the file has no header
    std::vector<std::string> row_names;  // empty when there is no name column

    bool any_missing() const { return observed.size() > 0 && !observed.all(); }

    DataMatrix data() const { return any_missing() ? DataMatrix(values, observed) : DataMatrix(values); }
};

/// Comma-separated numbers. The first row is a header when any of its cells
/// is neither a number nor a missing token; the first column holds row names
/// when every data row has a non-numeric first cell. `NA` (any case) and empty
/// cells are missing.
inline CsvTable parse_csv(std::istream& in, const std::string& source = "<input>") {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) {
            continue;
        }
        rows.push_back(detail::split_csv_line(line));
        line_numbers.push_back(lineno);
    }
    if (rows.empty()) {
        throw ParseError(source, 1, 0, "no data");
    }
    CsvTable t;
    bool header = false;
    for (const auto& cell : rows.front()) {
        if (!detail::is_numeric_or_missing(cell)) {
            header = true;
        }
    }
    const std::size_t first_data = header ? 1 : 0;
    if (first_data >= rows.size()) {
        throw ParseError(source, line_numbers.front(), 0, "header but no data rows");
    }
    bool row_names = true;
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        if (detail::is_numeric_or_missing(rows[r].front())) {
            row_names = false;
            break;
        }
    }
    const std::size_t skip = row_names ? 1 : 0;
    const std::size_t width = rows[first_data].size() - skip;
    const auto n = static_cast<Index>(rows.size() - first_data);
    const auto p = static_cast<Index>(width);
    if (p == 0) {
        throw ParseError(source, line_numbers[first_data], 0, "no numeric columns");
    }
    if (header) {
        auto names = rows.front();
        if (names.size() == width + skip) {
            names.erase(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(skip));
        } else if (!(row_names && names.size() == width)) {
            throw ParseError(source, line_numbers.front(), 0,
                             "header has " + std::to_string(names.size()) + " fields, data rows have " +
                                 std::to_string(width + skip));
        }
        t.col_names = std::move(names);
    }
    t.values = Matrix::Zero(n, p);
    t.observed = BoolMatrix::Constant(n, p, true);
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const auto i = static_cast<Index>(r - first_data);
        if (cells.size() != width + skip) {
            throw ParseError(source, line_numbers[r], 0,
                             "expected " + std::to_string(width + skip) + " fields, found " +
                                 std::to_string(cells.size()));
        }
        if (row_names) {
            t.row_names.push_back(cells.front());
        }
        for (std::size_t c = skip; c < cells.size(); ++c) {
            const auto j = static_cast<Index>(c - skip);
            if (detail::is_missing_token(cells[c])) {
                t.observed(i, j) = false;
                continue;
            }
            double v = 0.0;
            if (!detail::parse_number(cells[c], v)) {
                throw ParseError(source, line_numbers[r], c + 1, "not a number: '" + cells[c] + "'");
            }
            t.values(i, j) = v;
        }
    }
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, 0, "cannot open file");
    }
    return parse_csv(in, path);
}

inline std::string column_name(const CsvTable& t, Index j) {
    return t.col_names.empty() ? "V" + std::to_string(j + 1) : t.col_names[static_cast<std::size_t>(j)];
}

/// Rows of comma-separated shortest round-trip numbers, with an optional
/// header and row-name column.
inline void write_matrix_csv(std::ostream& os, const Matrix& M, const std::vector<std::string>& col_names = {},
                             const std::vector<std::string>& row_names = {}) {
    const bool names = !row_names.empty();
    if (!col_names.empty()) {
        if (names) {
            os << "\"\",";
        }
        for (std::size_t j = 0; j < col_names.size(); ++j) {
            os << (j ? "," : "") << col_names[j];
        }
        os << '\n';
    }
    for (Index i = 0; i < M.rows(); ++i) {
        if (names) {
            os << row_names[static_cast<std::size_t>(i)] << ',';
        }
        for (Index j = 0; j < M.cols(); ++j) {
            os << (j ? "," : "") << format_double(M(i, j));
        }
        os << '\n';
    }
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

/// `key = value` lines; `#` starts a comment; blank lines are ignored.
inline std::map<std::string, std::string> parse_config(std::istream& in, const std::string& source = "<config>") {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto s = detail::trim(line);
        if (s.empty()) {
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(source, lineno, 0, "expected 'key = value'");
        }
        const std::string key(detail::trim(s.substr(0, eq)));
        const std::string value(detail::trim(s.substr(eq + 1)));
        if (key.empty()) {
            throw ParseError(source, lineno, 0, "empty key");
        }
        kv[key] = value;
    }
    return kv;
}

inline std::map<std::string, std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, 0, "cannot open file");
    }
    return parse_config(in, path);
}

// JSON has no NaN or infinity; those become null.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json to_json(const FitState& st) {
    nlohmann::json j;
    j["iterations"] = st.iterations;
    j["converged"] = st.converged;
    j["final_objective"] = json_number(st.final_objective);
    auto trace = nlohmann::json::array();
    for (double v : st.objective_trace) {
        trace.push_back(json_number(v));
    }
    j["objective_trace"] = trace;
    auto iters = nlohmann::json::array();
    for (const auto& r : st.diagnostics) {
        iters.push_back({{"iteration", r.iteration},
                         {"objective", json_number(r.objective)},
                         {"nu1", json_number(r.nu1)},
                         {"nu2", json_number(r.nu2)},
                         {"u_change", json_number(r.u_change)},
                         {"prox_iterations", r.prox_iterations},
                         {"prox_converged", r.prox_converged},
                         {"prox_residual", json_number(r.prox_residual)},
                         {"prox_refinements", r.prox_refinements},
                         {"step_rejected", r.step_rejected},
                         {"affinities_refreshed", r.affinities_refreshed}});
    }
    j["diagnostics"] = iters;
    j["warnings"] = st.warnings;
    return j;
}

inline std::string gamma_path_csv(const GammaSelection& sel) {
    std::ostringstream os;
    os << "gamma,holdout_sse,converged,mm_iterations,selected,error\n";
    for (std::size_t g = 0; g < sel.path.size(); ++g) {
        const auto& e = sel.path[g];
        os << format_double(e.gamma) << ',' << (std::isfinite(e.holdout_sse) ? format_double(e.holdout_sse) : "NA")
           << ',' << (e.converged ? 1 : 0) << ',' << e.mm_iterations << ',' << (g == sel.index ? 1 : 0) << ",\""
           << e.error << "\"\n";
    }
    return os.str();
}

inline std::string lambda_path_csv(const LambdaSelection& sel) {
    std::ostringstream os;
    os << "lambda,ebic,df,n_row_clusters,n_col_clusters,num_zero_weights,converged,selected,error\n";
    for (std::size_t g = 0; g < sel.path.size(); ++g) {
        const auto& e = sel.path[g];
        os << format_double(e.lambda) << ',' << (std::isfinite(e.ebic) ? format_double(e.ebic) : "NA") << ','
           << e.df << ',' << e.n_row_clusters << ',' << e.n_col_clusters << ',' << e.num_zero_weights << ','
           << (e.converged ? 1 : 0) << ',' << (g == sel.index ? 1 : 0) << ",\"" << e.error << "\"\n";
    }
    return os.str();
}

inline nlohmann::json to_json(const GammaSelection& sel) {
    nlohmann::json j;
    j["selected_gamma"] = sel.gamma;
    auto rows = nlohmann::json::array();
    for (const auto& e : sel.path) {
        rows.push_back({{"gamma", e.gamma},
                        {"holdout_sse", json_number(e.holdout_sse)},
                        {"converged", e.converged},
                        {"mm_iterations", e.mm_iterations},
                        {"error", e.error}});
    }
    j["path"] = rows;
    return j;
}

inline nlohmann::json to_json(const LambdaSelection& sel) {
    nlohmann::json j;
    j["selected_lambda"] = sel.model.lambda;
    auto rows = nlohmann::json::array();
    for (const auto& e : sel.path) {
        rows.push_back({{"lambda", e.lambda},
                        {"ebic", json_number(e.ebic)},
                        {"df", e.df},
                        {"n_row_clusters", e.n_row_clusters},
                        {"n_col_clusters", e.n_col_clusters},
                        {"num_zero_weights", e.num_zero_weights},
                        {"converged", e.converged},
                        {"error", e.error}});
    }
    j["path"] = rows;
    return j;
}

inline std::string study_results_csv(const std::vector<StudyRecord>& records) {
    std::ostringstream os;
    os << "study,setting,replicate,seed,method,metric,value\n";
    for (const auto& r : records) {
        os << r.study << ",\"" << r.setting << "\"," << r.replicate << ',' << r.seed << ',' << r.method << ','
           << r.metric << ',' << format_double(r.value) << '\n';
    }
    return os.str();
}

inline std::string study_summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "study,setting,method,metric,count,mean,se\n";
    for (const auto& r : rows) {
        os << r.study << ",\"" << r.setting << "\"," << r.method << ',' << r.metric << ',' << r.count << ','
           << format_double(r.mean) << ',' << format_double(r.se) << '\n';
    }
    return os.str();
}

inline std::string study_timings_csv(const std::vector<StudyTiming>& t) {
    std::ostringstream os;
    os << "setting,replicate,method,seconds\n";
    for (const auto& r : t) {
        os << '"' << r.setting << "\"," << r.replicate << ',' << r.method << ',' << format_double(r.seconds) << '\n';
    }
    return os.str();
}

namespace detail {

// Blue-white-red ramp over [-1, 1].
inline std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    int r = 255;
    int g = 255;
    int b = 255;
    if (t < 0.0) {
        r = g = static_cast<int>(std::lround(255.0 * (1.0 + t)));
    } else {
        g = b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

inline std::vector<Index> order_by_label(const std::vector<int>& labels) {
    std::vector<Index> order(labels.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
    });
    return order;
}

}  // namespace detail

/// Heatmap of M with rows and columns grouped by label and lines at cluster
/// boundaries; colors scale symmetrically to the largest magnitude.
inline std::string heatmap_svg(const Matrix& M, const std::vector<int>& row_labels,
                               const std::vector<int>& col_labels, double cell = 6.0) {
    const auto ro = detail::order_by_label(row_labels);
    const auto co = detail::order_by_label(col_labels);
    const double scale = std::max(M.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double W = cell * static_cast<double>(M.cols());
    const double H = cell * static_cast<double>(M.rows());
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(W) << "\" height=\""
       << format_double(H) << "\" viewBox=\"0 0 " << format_double(W) << ' ' << format_double(H) << "\">\n";
    for (std::size_t a = 0; a < ro.size(); ++a) {
        for (std::size_t b = 0; b < co.size(); ++b) {
            os << "<rect x=\"" << format_double(cell * static_cast<double>(b)) << "\" y=\""
               << format_double(cell * static_cast<double>(a)) << "\" width=\"" << format_double(cell)
               << "\" height=\"" << format_double(cell) << "\" fill=\""
               << detail::diverging_color(M(ro[a], co[b]) / scale) << "\"/>\n";
        }
    }
    for (std::size_t a = 1; a < ro.size(); ++a) {
        if (row_labels[static_cast<std::size_t>(ro[a])] != row_labels[static_cast<std::size_t>(ro[a - 1])]) {
            const std::string y = format_double(cell * static_cast<double>(a));
            os << "<line x1=\"0\" y1=\"" << y << "\" x2=\"" << format_double(W) << "\" y2=\"" << y
               << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        }
    }
    for (std::size_t b = 1; b < co.size(); ++b) {
        if (col_labels[static_cast<std::size_t>(co[b])] != col_labels[static_cast<std::size_t>(co[b - 1])]) {
            const std::string x = format_double(cell * static_cast<double>(b));
            os << "<line x1=\"" << x << "\" y1=\"0\" x2=\"" << x << "\" y2=\"" << format_double(H)
               << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace bicoclust
