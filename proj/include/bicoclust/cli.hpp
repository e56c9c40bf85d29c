#pragma once

// Command implementations behind tools/bicoclust. Settings arrive as a flat
// key -> value map (config file first, then flags of the same name); each
// command resolves them, runs, writes its report files and returns an exit
// code.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "core.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "palm.hpp"
#include "parallel.hpp"
#include "simbench.hpp"
#include "tuning.hpp"

namespace bicoclust::cli {

enum ExitCode : int { ok = 0, input_error = 1, not_converged = 2, internal_error = 3 };

/// Bad user input: unreadable files, malformed values, unknown keys.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Settings = std::map<std::string, std::string>;

enum class Command { fit, tune, impute, sim };

inline const char* to_string(Command c) {
    switch (c) {
        case Command::fit: return "fit";
        case Command::tune: return "tune";
        case Command::impute: return "impute";
        case Command::sim: return "sim";
    }
    return "?";
}

/// Every recognized key, with a one-line description for --help.
inline const std::vector<std::pair<std::string, std::string>>& setting_keys() {
    static const std::vector<std::pair<std::string, std::string>> keys{
        {"gamma", "fusion strength (default 1; sim default 100)"},
        {"lambda", "weight ridge term (default 0)"},
        {"tau", "kernel bandwidth of the kNN affinities (default 1)"},
        {"k-row", "row neighbours (default 5)"},
        {"k-col", "column neighbours (default 5)"},
        {"adaptive", "recompute affinities from the iterate: true|false (default false)"},
        {"refresh-every", "adaptive refresh period in iterations (default 1)"},
        {"tol", "relative U-change stopping tolerance (default 1e-4)"},
        {"max-iter", "PALM iteration cap (default 200)"},
        {"prox-inner-tol", "ADMM tolerance (default 1e-6)"},
        {"prox-inner-max-iter", "ADMM iteration cap (default 2000)"},
        {"prox-outer-tol", "row/column alternation tolerance (default 1e-6)"},
        {"prox-outer-max-iter", "row/column alternation cap (default 200)"},
        {"mm-tol", "missing-data MM tolerance (default 1e-5)"},
        {"mm-max-iter", "missing-data MM cap (default 50)"},
        {"gamma-grid", "comma list, or 'default' (20 log points over [1e-2, 1e3])"},
        {"lambda-grid", "comma list, or 'default' ({0} and 9 log points over [1e-4, 1]/p)"},
        {"holdout-fraction", "fraction of entries kept for the gamma stage (default 0.85)"},
        {"holdout-max-iter", "PALM cap during the gamma stage (default: max-iter)"},
        {"holdout-mm-max-iter", "MM cap during the gamma stage (default: mm-max-iter)"},
        {"gamma-stage-adaptive", "same|true|false (default same as adaptive)"},
        {"r1-frac", "row linking radius as a fraction of the distance sd (default 0.1)"},
        {"r2-frac", "column linking radius as a fraction of the distance sd (default 0.1)"},
        {"seed", "hold-out seed for tune (default 1)"},
        {"seeds", "sim seeds: comma list or a:b range (default 1:8)"},
        {"threads", "worker cap; 0 reads BICOCLUST_THREADS, else 1 (default 0)"},
        {"scale", "sim scale: desk|paper (default desk)"},
        {"replicates", "theorem1 replicates (default 200)"},
        {"tune-gamma", "sim: select gamma by hold-out per replicate (default false)"},
    };
    return keys;
}

struct RunConfig {
    Hyperparameters hp;
    PalmConfig palm;
    MissingFitConfig missing;
    std::vector<double> gamma_grid;
    std::optional<std::vector<double>> lambda_grid;  // default depends on p
    double holdout_fraction = 0.85;
    PalmConfig holdout_palm;
    MissingFitConfig holdout_missing;
    double r1_frac = 0.1;
    double r2_frac = 0.1;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;
    int threads = 1;
    std::string scale = "desk";
    int replicates = 200;
    bool tune_gamma = false;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!bicoclust::detail::parse_number(std::string(bicoclust::detail::trim(v)), out)) {
        throw InputError("setting '" + key + "': not a finite number: '" + v + "'");
    }
    return out;
}

inline long long to_integer(const std::string& key, const std::string& v) {
    const std::string s(bicoclust::detail::trim(v));
    long long out = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw InputError("setting '" + key + "': not an integer: '" + v + "'");
    }
    return out;
}

inline int to_int(const std::string& key, const std::string& v) {
    const long long x = to_integer(key, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw InputError("setting '" + key + "': out of range: '" + v + "'");
    }
    return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    const std::string s(bicoclust::detail::trim(v));
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    throw InputError("setting '" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(to_double(key, item));
    }
    if (out.empty()) {
        throw InputError("setting '" + key + "': empty list");
    }
    return out;
}

inline std::vector<std::uint64_t> to_seed_list(const std::string& key, const std::string& v) {
    std::vector<std::uint64_t> out;
    if (const auto colon = v.find(':'); colon != std::string::npos) {
        const long long a = to_integer(key, v.substr(0, colon));
        const long long b = to_integer(key, v.substr(colon + 1));
        if (a < 0 || b < a) {
            throw InputError("setting '" + key + "': bad range '" + v + "'");
        }
        for (long long s = a; s <= b; ++s) {
            out.push_back(static_cast<std::uint64_t>(s));
        }
        return out;
    }
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const long long s = to_integer(key, item);
        if (s < 0) {
            throw InputError("setting '" + key + "': seeds must be >= 0");
        }
        out.push_back(static_cast<std::uint64_t>(s));
    }
    if (out.empty()) {
        throw InputError("setting '" + key + "': empty list");
    }
    return out;
}

}  // namespace detail

/// Resolves settings for a command; unknown keys and malformed values are
/// input errors.
inline RunConfig resolve_config(const Settings& s, Command cmd) {
    std::set<std::string> known;
    for (const auto& [k, _] : setting_keys()) {
        known.insert(k);
    }
    for (const auto& [k, _] : s) {
        if (!known.count(k)) {
            throw InputError("unknown setting '" + k + "'");
        }
    }
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        const auto it = s.find(k);
        if (it == s.end()) {
            return std::nullopt;
        }
        return it->second;
    };
    RunConfig rc;
    rc.hp.gamma = cmd == Command::sim ? 100.0 : 1.0;
    if (auto v = get("gamma")) rc.hp.gamma = detail::to_double("gamma", *v);
    if (auto v = get("lambda")) rc.hp.lambda = detail::to_double("lambda", *v);
    if (auto v = get("tau")) rc.hp.tau = detail::to_double("tau", *v);
    if (auto v = get("k-row")) rc.hp.k_row = detail::to_int("k-row", *v);
    if (auto v = get("k-col")) rc.hp.k_col = detail::to_int("k-col", *v);
    if (auto v = get("adaptive")) rc.palm.adaptive = detail::to_bool("adaptive", *v);
    if (auto v = get("refresh-every")) rc.palm.refresh_affinities_every = detail::to_int("refresh-every", *v);
    if (auto v = get("tol")) rc.palm.tol = detail::to_double("tol", *v);
    if (auto v = get("max-iter")) rc.palm.max_outer_iter = detail::to_int("max-iter", *v);
    if (auto v = get("prox-inner-tol")) rc.palm.prox.inner_tol = detail::to_double("prox-inner-tol", *v);
    if (auto v = get("prox-inner-max-iter")) rc.palm.prox.inner_max_iter = detail::to_int("prox-inner-max-iter", *v);
    if (auto v = get("prox-outer-tol")) rc.palm.prox.outer_tol = detail::to_double("prox-outer-tol", *v);
    if (auto v = get("prox-outer-max-iter")) rc.palm.prox.outer_max_iter = detail::to_int("prox-outer-max-iter", *v);
    if (auto v = get("mm-tol")) rc.missing.mm_tol = detail::to_double("mm-tol", *v);
    if (auto v = get("mm-max-iter")) rc.missing.mm_max_iter = detail::to_int("mm-max-iter", *v);

    rc.gamma_grid = default_gamma_grid();
    if (auto v = get("gamma-grid"); v && *v != "default") rc.gamma_grid = detail::to_double_list("gamma-grid", *v);
    if (auto v = get("lambda-grid"); v && *v != "default") rc.lambda_grid = detail::to_double_list("lambda-grid", *v);
    if (auto v = get("holdout-fraction")) rc.holdout_fraction = detail::to_double("holdout-fraction", *v);

    rc.holdout_palm = rc.palm;
    rc.holdout_missing = rc.missing;
    if (auto v = get("holdout-max-iter")) rc.holdout_palm.max_outer_iter = detail::to_int("holdout-max-iter", *v);
    if (auto v = get("holdout-mm-max-iter")) {
        rc.holdout_missing.mm_max_iter = detail::to_int("holdout-mm-max-iter", *v);
    }
    if (auto v = get("gamma-stage-adaptive"); v && *v != "same") {
        rc.holdout_palm.adaptive = detail::to_bool("gamma-stage-adaptive", *v);
    }

    if (auto v = get("r1-frac")) rc.r1_frac = detail::to_double("r1-frac", *v);
    if (auto v = get("r2-frac")) rc.r2_frac = detail::to_double("r2-frac", *v);
    if (auto v = get("seed")) {
        const long long x = detail::to_integer("seed", *v);
        if (x < 0) {
            throw InputError("setting 'seed': must be >= 0");
        }
        rc.seed = static_cast<std::uint64_t>(x);
    }
    rc.seeds = detail::to_seed_list("seeds", get("seeds").value_or("1:8"));
    int threads = 0;
    if (auto v = get("threads")) threads = detail::to_int("threads", *v);
    if (threads < 0) {
        throw InputError("setting 'threads': must be >= 0");
    }
    rc.threads = resolve_threads(threads);
    if (auto v = get("scale")) rc.scale = *v;
    if (rc.scale != "desk" && rc.scale != "paper") {
        throw InputError("setting 'scale': expected desk or paper, got '" + rc.scale + "'");
    }
    if (auto v = get("replicates")) rc.replicates = detail::to_int("replicates", *v);
    if (auto v = get("tune-gamma")) rc.tune_gamma = detail::to_bool("tune-gamma", *v);

    try {
        rc.palm.validate();
        rc.holdout_palm.validate();
        rc.missing.validate();
        rc.holdout_missing.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (!(rc.holdout_fraction > 0.0 && rc.holdout_fraction < 1.0)) {
        throw InputError("setting 'holdout-fraction': must be in (0, 1)");
    }
    if (rc.r1_frac < 0.0 || rc.r2_frac < 0.0) {
        throw InputError("settings 'r1-frac' and 'r2-frac' must be >= 0");
    }
    if (rc.replicates < 1) {
        throw InputError("setting 'replicates': must be >= 1");
    }
    for (double g : rc.gamma_grid) {
        if (g < 0.0) throw InputError("setting 'gamma-grid': values must be >= 0");
    }
    return rc;
}

/// Where outputs go. Files are always written to `out_dir`; with `to_stdout`
/// the command's main table is also printed to standard output.
struct OutputSpec {
    std::string out_dir = "out";
    bool to_stdout = false;
    std::ostream* stdout_stream = &std::cout;
};

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw InputError("cannot create output directory '" + dir + "'");
    }
    return std::filesystem::path(dir);
}

inline CsvTable load_table(const std::string& input) {
    if (!std::filesystem::exists(input)) {
        throw InputError("input file not found: '" + input + "'");
    }
    return read_csv(input);
}

inline void require_complete(const CsvTable& t, const std::string& input) {
    if (t.any_missing()) {
        for (Index j = 0; j < t.observed.cols(); ++j) {
            for (Index i = 0; i < t.observed.rows(); ++i) {
                if (!t.observed(i, j)) {
                    throw InputError(input + ": missing value at data row " + std::to_string(i + 1) + ", column '" +
                                     column_name(t, j) + "'; run 'bicoclust impute' first");
                }
            }
        }
    }
}

inline std::vector<std::string> column_names(const CsvTable& t) {
    std::vector<std::string> names;
    for (Index j = 0; j < t.values.cols(); ++j) {
        names.push_back(column_name(t, j));
    }
    return names;
}

inline std::string row_key(const CsvTable& t, Index i) {
    return t.row_names.empty() ? std::to_string(i + 1) : t.row_names[static_cast<std::size_t>(i)];
}

inline std::string labels_csv(const std::vector<int>& labels, const std::string& head,
                              const std::function<std::string(Index)>& key) {
    std::ostringstream os;
    os << head << ",label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        os << key(static_cast<Index>(i)) << ',' << labels[i] << '\n';
    }
    return os.str();
}

inline std::string matrix_csv(const Matrix& M, const CsvTable& t) {
    std::ostringstream os;
    write_matrix_csv(os, M, t.col_names, t.row_names);
    return os.str();
}

inline nlohmann::json hp_json(const Hyperparameters& hp, const PalmConfig& cfg) {
    return {{"gamma", hp.gamma},
            {"lambda", hp.lambda},
            {"tau", hp.tau},
            {"k_row", hp.k_row},
            {"k_col", hp.k_col},
            {"adaptive", cfg.adaptive},
            {"tol", cfg.tol},
            {"max_iter", cfg.max_outer_iter}};
}

// U, weights, labels, diagnostics and heatmap for one fitted model.
inline void write_fit_outputs(const std::filesystem::path& dir, const CsvTable& t, const FitState& st,
                              const BiclusterModel& model, const Hyperparameters& hp, const PalmConfig& cfg,
                              const OutputSpec& out) {
    const std::string u_csv = matrix_csv(st.U, t);
    write_file((dir / "U.csv").string(), u_csv);
    {
        std::ostringstream os;
        os << "column,weight\n";
        for (Index j = 0; j < st.w.size(); ++j) {
            os << column_name(t, j) << ',' << format_double(st.w.values()(j)) << '\n';
        }
        write_file((dir / "weights.csv").string(), os.str());
    }
    write_file((dir / "row_labels.csv").string(),
               labels_csv(model.row_labels, "row", [&](Index i) { return row_key(t, i); }));
    write_file((dir / "col_labels.csv").string(),
               labels_csv(model.col_labels, "column", [&](Index j) { return column_name(t, j); }));
    nlohmann::json diag = to_json(st);
    diag["hyperparameters"] = hp_json(hp, cfg);
    diag["df"] = model.df;
    diag["ebic"] = json_number(model.ebic);
    write_file((dir / "diagnostics.json").string(), diag.dump(2) + "\n");
    write_file((dir / "heatmap.svg").string(), heatmap_svg(model.U_star, model.row_labels, model.col_labels));
    if (out.to_stdout) {
        *out.stdout_stream << u_csv;
    }
}

inline void check_hp(const Hyperparameters& hp, Index n, Index p) {
    try {
        hp.validate(n, p);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

}  // namespace detail

/// Fit at fixed (gamma, lambda) with affinities built from the data.
inline int cmd_fit(const std::string& input, const RunConfig& rc, const OutputSpec& out) {
    const CsvTable t = detail::load_table(input);
    detail::require_complete(t, input);
    detail::check_hp(rc.hp, t.values.rows(), t.values.cols());
    const auto dir = detail::prepare_dir(out.out_dir);
    spdlog::info("fit: {} x {} matrix, gamma = {}, lambda = {}", t.values.rows(), t.values.cols(), rc.hp.gamma,
                 rc.hp.lambda);
    const DataMatrix X(t.values);
    const GknnGraphs g = gknn_graphs(t.values, rc.hp);
    if (g.phi_repaired || g.psi_repaired) {
        spdlog::info("fit: kNN graph disconnected; bridged its components");
    }
    const FitState st = fit(X, g.phi, g.psi, rc.hp, rc.palm);
    const BiclusterModel model = build_model(t.values, st, rc.hp.gamma, rc.hp.lambda, rc.r1_frac, rc.r2_frac);
    for (const auto& w : st.warnings) {
        spdlog::warn("fit: {}", w);
    }
    detail::write_fit_outputs(dir, t, st, model, rc.hp, rc.palm, out);
    spdlog::info("fit: {} iterations, converged = {}, objective = {}", st.iterations, st.converged,
                 st.final_objective);
    return st.converged ? ok : not_converged;
}

/// Hold-out gamma selection, then eBIC lambda selection at the chosen gamma,
/// then the fit outputs of the selected model.
inline int cmd_tune(const std::string& input, const RunConfig& rc, const OutputSpec& out) {
    const CsvTable t = detail::load_table(input);
    detail::require_complete(t, input);
    detail::check_hp(rc.hp, t.values.rows(), t.values.cols());
    const auto dir = detail::prepare_dir(out.out_dir);
    const DataMatrix X(t.values);
    const GknnGraphs g = gknn_graphs(t.values, rc.hp);
    const HoldoutSplit split = make_holdout(X.n(), X.p(), rc.holdout_fraction, rc.seed);
    TuningOptions topt;
    topt.missing = rc.holdout_missing;
    topt.threads = rc.threads;
    topt.r1_frac = rc.r1_frac;
    topt.r2_frac = rc.r2_frac;
    spdlog::info("tune: gamma stage over {} grid points, {} entries held out", rc.gamma_grid.size(),
                 split.num_held_out());
    const GammaSelection gs = select_gamma(X, g.phi, g.psi, rc.gamma_grid, split, rc.hp, rc.holdout_palm, topt);
    for (const auto& e : gs.path) {
        if (!e.error.empty()) {
            spdlog::warn("tune: gamma = {} failed: {}", e.gamma, e.error);
        }
    }
    write_file((dir / "gamma_path.csv").string(), gamma_path_csv(gs));
    const std::vector<double> lgrid = rc.lambda_grid.value_or(default_lambda_grid(X.p()));
    topt.missing = rc.missing;
    spdlog::info("tune: gamma* = {}; lambda stage over {} grid points", gs.gamma, lgrid.size());
    const LambdaSelection ls = select_lambda(X, g.phi, g.psi, gs.gamma, lgrid, rc.hp, rc.palm, topt);
    write_file((dir / "lambda_path.csv").string(), lambda_path_csv(ls));
    nlohmann::json model;
    model["gamma"] = ls.model.gamma;
    model["lambda"] = ls.model.lambda;
    model["df"] = ls.model.df;
    model["ebic"] = json_number(ls.model.ebic);
    model["row_labels"] = ls.model.row_labels;
    model["col_labels"] = ls.model.col_labels;
    model["weights"] = std::vector<double>(ls.model.w.values().data(),
                                           ls.model.w.values().data() + ls.model.w.size());
    model["column_names"] = detail::column_names(t);
    model["gamma_path"] = to_json(gs)["path"];
    model["lambda_path"] = to_json(ls)["path"];
    write_file((dir / "model.json").string(), model.dump(2) + "\n");
    Hyperparameters hp = rc.hp;
    hp.gamma = ls.model.gamma;
    hp.lambda = ls.model.lambda;
    OutputSpec quiet = out;
    quiet.to_stdout = false;
    detail::write_fit_outputs(dir, t, ls.state, ls.model, hp, rc.palm, quiet);
    if (out.to_stdout) {
        *out.stdout_stream << model.dump(2) << '\n';
    }
    spdlog::info("tune: selected gamma = {}, lambda = {}, eBIC = {}", hp.gamma, hp.lambda, ls.model.ebic);
    return ls.state.converged ? ok : not_converged;
}

/// Missing-data fit; writes the completed matrix and MM diagnostics.
inline int cmd_impute(const std::string& input, const RunConfig& rc, const OutputSpec& out) {
    const CsvTable t = detail::load_table(input);
    for (Index j = 0; j < t.observed.cols(); ++j) {
        if (!t.observed.col(j).any()) {
            throw InputError(input + ": column '" + column_name(t, j) + "' has no observed values");
        }
    }
    detail::check_hp(rc.hp, t.values.rows(), t.values.cols());
    const auto dir = detail::prepare_dir(out.out_dir);
    const DataMatrix X = t.data();
    spdlog::info("impute: {} x {} matrix, {} missing entries", X.n(), X.p(), X.has_mask() ? X.num_missing() : 0);
    const GknnGraphs g = gknn_graphs(mean_fill(X), rc.hp);
    const MissingFitResult r = fit_missing(X, g.phi, g.psi, rc.hp, rc.palm, rc.missing);
    const std::string completed = detail::matrix_csv(r.completed, t);
    write_file((dir / "completed.csv").string(), completed);
    nlohmann::json diag;
    diag["mm_iterations"] = r.mm_iterations;
    diag["mm_converged"] = r.mm_converged;
    auto arr = [](const std::vector<double>& v) {
        auto a = nlohmann::json::array();
        for (double x : v) {
            a.push_back(json_number(x));
        }
        return a;
    };
    diag["masked_objective_trace"] = arr(r.masked_objective_trace);
    diag["majorizer_trace"] = arr(r.majorizer_trace);
    diag["completed_change"] = arr(r.completed_change);
    diag["final_fit"] = to_json(r.state);
    diag["hyperparameters"] = detail::hp_json(rc.hp, rc.palm);
    write_file((dir / "impute_diag.json").string(), diag.dump(2) + "\n");
    if (out.to_stdout) {
        *out.stdout_stream << completed;
    }
    const bool converged = r.mm_converged && r.state.converged;
    spdlog::info("impute: {} MM iterations, converged = {}", r.mm_iterations, converged);
    return converged ? ok : not_converged;
}

/// Simulation studies: "1" and "2" compare fixed and adaptive affinities on
/// checkerboards, "theorem1" checks the prediction-error bound.
inline int cmd_sim(const std::string& study, const RunConfig& rc, const OutputSpec& out) {
    std::vector<StudyRecord> records;
    std::vector<StudyTiming> timings;
    const bool desk = rc.scale == "desk";
    if (study == "1" || study == "2") {
        const std::vector<StudyCase> cases = study == "1" ? (desk ? study1_cases(rc.seeds) : study1_paper_cases(rc.seeds))
                                                          : (desk ? study2_cases(rc.seeds) : study2_paper_cases(rc.seeds));
        StudyFitOptions opt;
        opt.hp = rc.hp;
        opt.palm = rc.palm;
        opt.r1_frac = rc.r1_frac;
        opt.r2_frac = rc.r2_frac;
        opt.tune_gamma = rc.tune_gamma;
        opt.gamma_grid = rc.gamma_grid;
        opt.holdout_fraction = rc.holdout_fraction;
        opt.missing = rc.holdout_missing;
        opt.threads = rc.threads;
        spdlog::info("sim: study {} at {} scale, {} cases x 2 methods, {} threads", study, rc.scale, cases.size(),
                     rc.threads);
        StudyResult res = run_study("study" + study, cases, opt);
        records = std::move(res.records);
        timings = std::move(res.timings);
    } else if (study == "theorem1") {
        TheoremCheckOptions opt;
        opt.palm = rc.palm;
        opt.threads = rc.threads;
        const std::string setting = "n=p=20,sigma=1";
        spdlog::info("sim: theorem1, {} replicates per seed", rc.replicates);
        for (std::uint64_t seed : rc.seeds) {
            const TheoremCheckResult res = theorem1_check(20, 20, 1.0, rc.replicates, seed, opt);
            for (const auto& r : res.replicates) {
                for (const auto& [metric, v] : std::vector<std::pair<const char*, double>>{
                         {"gamma", r.gamma},
                         {"lhs", r.lhs},
                         {"rhs", r.rhs},
                         {"holds", r.holds ? 1.0 : 0.0},
                         {"converged", r.converged ? 1.0 : 0.0}}) {
                    records.push_back({"theorem1", setting, r.replicate, seed, "palm", metric, v});
                }
            }
            spdlog::info("sim: theorem1 seed {}: bound holds in {} of replicates", seed, res.fraction_holding);
        }
    } else {
        throw InputError("unknown study '" + study + "' (expected 1, 2 or theorem1)");
    }
    const auto dir = detail::prepare_dir(out.out_dir);
    write_file((dir / "results.csv").string(), study_results_csv(records));
    const std::string summary = study_summary_csv(summarize(records));
    write_file((dir / "summary.csv").string(), summary);
    if (!timings.empty()) {
        write_file((dir / "timings.csv").string(), study_timings_csv(timings));
    }
    for (const auto& r : records) {
        if (r.metric == "failed") {
            spdlog::warn("sim: {} replicate {} ({}) failed", r.setting, r.replicate, r.method);
        }
    }
    if (out.to_stdout) {
        *out.stdout_stream << summary;
    }
    return ok;
}

/// Resolves settings, runs a command and maps exceptions to exit codes.
/// `target` is the input CSV, or the study id for sim.
inline int run(Command cmd, const std::string& target, const Settings& settings, const OutputSpec& out) {
    try {
        const RunConfig rc = resolve_config(settings, cmd);
        switch (cmd) {
            case Command::fit: return cmd_fit(target, rc, out);
            case Command::tune: return cmd_tune(target, rc, out);
            case Command::impute: return cmd_impute(target, rc, out);
            case Command::sim: return cmd_sim(target, rc, out);
        }
        return internal_error;
    } catch (const InputError& e) {
        spdlog::error("{}", e.what());
        return input_error;
    } catch (const ParseError& e) {
        spdlog::error("{}", e.what());
        return input_error;
    } catch (const std::exception& e) {
        spdlog::error("internal error: {}", e.what());
        return internal_error;
    }
}

}  // namespace bicoclust::cli
