#pragma once

// Two-stage hyperparameter selection: gamma by hold-out error of a
// missing-data fit, then lambda by eBIC of a least-squares bicluster refit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "graph.hpp"
#include "palm.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace bicoclust {

struct HoldoutSplit {
    BoolMatrix observed_mask;
    std::uint64_t seed = 0;
    double fraction_observed = 1.0;

    Index num_held_out() const { return static_cast<Index>(observed_mask.size() - observed_mask.count()); }
};

/// Each entry is kept with probability `fraction`; a column left with no kept
/// entry gets one random entry restored.
inline HoldoutSplit make_holdout(Index n, Index p, double fraction, std::uint64_t seed) {
    detail::require(n >= 1 && p >= 1, "make_holdout: dimensions must be positive");
    detail::require(fraction > 0.0 && fraction <= 1.0, "make_holdout: fraction must be in (0, 1]");
    HoldoutSplit split;
    split.seed = seed;
    split.fraction_observed = fraction;
    split.observed_mask = BoolMatrix::Constant(n, p, true);
    if (fraction == 1.0) {
        return split;
    }
    Rng rng = make_rng(seed, 0x686f6c64);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            split.observed_mask(i, j) = uniform01(rng) < fraction;
        }
    }
    for (Index j = 0; j < p; ++j) {
        if (!split.observed_mask.col(j).any()) {
            split.observed_mask(static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n))), j) = true;
        }
    }
    return split;
}

/// X with every observed entry also required to be kept by `split`.
inline DataMatrix apply_holdout(const DataMatrix& X, const HoldoutSplit& split) {
    detail::require(split.observed_mask.rows() == X.n() && split.observed_mask.cols() == X.p(),
                    "apply_holdout: split dimensions do not match data");
    BoolMatrix mask = split.observed_mask;
    if (X.has_mask()) {
        mask = mask.array() && X.mask().array();
    }
    return DataMatrix(X.values(), std::move(mask));
}

/// Observed entries of X, unobserved ones set to the mean of all observed entries.
inline Matrix mean_fill(const DataMatrix& X) {
    Matrix M = X.values();
    if (!X.has_mask()) {
        return M;
    }
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < X.n(); ++i) {
        for (Index j = 0; j < X.p(); ++j) {
            if (X.observed(i, j)) {
                sum += M(i, j);
                ++count;
            }
        }
    }
    const double mean = sum / static_cast<double>(count);
    for (Index i = 0; i < X.n(); ++i) {
        for (Index j = 0; j < X.p(); ++j) {
            if (!X.observed(i, j)) {
                M(i, j) = mean;
            }
        }
    }
    return M;
}

/// P_I(X) + P_Ic(fill).
inline Matrix complete_with(const DataMatrix& X, const Matrix& fill) {
    Matrix M = fill;
    for (Index i = 0; i < X.n(); ++i) {
        for (Index j = 0; j < X.p(); ++j) {
            if (X.observed(i, j)) {
                M(i, j) = X.values()(i, j);
            }
        }
    }
    return M;
}

/// Objective with the loss restricted to observed entries.
inline double masked_objective(const DataMatrix& X, const Matrix& U, const SimplexWeights& w,
                               const AffinityGraph& phi, const AffinityGraph& psi, double gamma, double lambda) {
    detail::require(U.rows() == X.n() && U.cols() == X.p() && w.size() == X.p(),
                    "masked_objective: dimension mismatch");
    const Vector c = w.loss_coefficients(lambda);
    double loss = 0.0;
    for (Index i = 0; i < X.n(); ++i) {
        for (Index j = 0; j < X.p(); ++j) {
            if (X.observed(i, j)) {
                const double r = U(i, j) - X.values()(i, j);
                loss += c(j) * r * r;
            }
        }
    }
    return gamma * fusion_penalty(U, phi, psi) + 0.5 * loss;
}

/// Majorizer of masked_objective at U_tilde: the full weighted loss against
/// P_I(X) + P_Ic(U_tilde).
inline double majorizer(const DataMatrix& X, const Matrix& U, const SimplexWeights& w, const Matrix& U_tilde,
                        const AffinityGraph& phi, const AffinityGraph& psi, double gamma, double lambda) {
    return objective(complete_with(X, U_tilde), U, w, phi, psi, gamma, lambda);
}

struct MissingFitConfig {
    double mm_tol = 1e-5;
    int mm_max_iter = 50;

    void validate() const {
        detail::require(mm_tol > 0.0, "MissingFitConfig: mm_tol must be > 0");
        detail::require(mm_max_iter >= 1, "MissingFitConfig: mm_max_iter must be >= 1");
    }
};

struct MissingFitResult {
    FitState state;
    Matrix completed;
    int mm_iterations = 0;
    bool mm_converged = true;
    std::vector<double> masked_objective_trace;  // entry t at (U^t, w^t); entry 0 is the start
    std::vector<double> majorizer_trace;         // G(U^{t+1}, w^{t+1} | U^t)
    std::vector<double> completed_change;
};

/// Majorization-minimization over the unobserved entries. Each round fits the
/// completed matrix M = P_I(X) + P_Ic(U^t) starting from (U^t, w^t), so the
/// masked objective cannot increase; it stops once M changes by at most
/// mm_tol relative to max(1, ||M||_F). Without a mask this is `fit`.
inline MissingFitResult fit_missing(const DataMatrix& X, const AffinityGraph& phi, const AffinityGraph& psi,
                                    const Hyperparameters& hp, const PalmConfig& cfg,
                                    const MissingFitConfig& mcfg = {}) {
    mcfg.validate();
    MissingFitResult out;
    if (!X.has_mask() || X.num_missing() == 0) {
        out.state = fit(DataMatrix(X.values()), phi, psi, hp, cfg);
        out.completed = X.values();
        return out;
    }
    Matrix M = mean_fill(X);
    Matrix U = M;
    SimplexWeights w = SimplexWeights::uniform(X.p());
    AffinityGraph g_row = phi;
    AffinityGraph g_col = psi;
    out.masked_objective_trace.push_back(masked_objective(X, U, w, g_row, g_col, hp.gamma, hp.lambda));
    out.mm_converged = false;
    for (int t = 1; t <= mcfg.mm_max_iter; ++t) {
        FitState st = fit(DataMatrix(M), g_row, g_col, hp, cfg, w, U);
        out.majorizer_trace.push_back(objective(M, st.U, st.w, st.phi, st.psi, hp.gamma, hp.lambda));
        U = st.U;
        w = st.w;
        g_row = st.phi;
        g_col = st.psi;
        out.masked_objective_trace.push_back(masked_objective(X, U, w, g_row, g_col, hp.gamma, hp.lambda));
        Matrix M_next = complete_with(X, U);
        const double change = (M_next - M).norm() / std::max(1.0, M.norm());
        out.completed_change.push_back(change);
        M = std::move(M_next);
        out.state = std::move(st);
        out.mm_iterations = t;
        if (change <= mcfg.mm_tol) {
            out.mm_converged = true;
            break;
        }
    }
    out.completed = std::move(M);
    if (!out.mm_converged) {
        out.state.warnings.push_back("missing-data iteration cap reached");
    }
    return out;
}

/// Log-spaced grid from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int count) {
    detail::require(lo > 0.0 && hi >= lo && count >= 1, "log_grid: need 0 < lo <= hi and count >= 1");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    }
    return g;
}

inline std::vector<double> default_gamma_grid() { return log_grid(1e-2, 1e3, 20); }

/// {0} followed by nine log-spaced values over [1e-4, 1] / p.
inline std::vector<double> default_lambda_grid(Index p) {
    std::vector<double> g{0.0};
    for (double v : log_grid(1e-4 / static_cast<double>(p), 1.0 / static_cast<double>(p), 9)) {
        g.push_back(v);
    }
    return g;
}

struct GammaPathEntry {
    double gamma = 0.0;
    double holdout_sse = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int mm_iterations = 0;
    std::string error;
};

struct GammaSelection {
    double gamma = 0.0;
    std::size_t index = 0;
    std::vector<GammaPathEntry> path;
};

struct TuningOptions {
    MissingFitConfig missing;
    int threads = 1;
    double r1_frac = 0.1;
    double r2_frac = 0.1;
};

/// Hold-out SSE of a lambda = 0 missing-data fit for every grid value; the
/// smallest SSE wins and ties go to the earlier grid entry. Entries of X that
/// are already missing are neither fitted nor scored.
inline GammaSelection select_gamma(const DataMatrix& X, const AffinityGraph& phi, const AffinityGraph& psi,
                                   const std::vector<double>& gamma_grid, const HoldoutSplit& split,
                                   const Hyperparameters& hp, const PalmConfig& cfg, const TuningOptions& opt = {}) {
    detail::require(!gamma_grid.empty(), "select_gamma: empty gamma grid");
    for (double g : gamma_grid) {
        detail::require(std::isfinite(g) && g >= 0.0, "select_gamma: grid values must be >= 0");
    }
    const DataMatrix Xh = apply_holdout(X, split);
    GammaSelection sel;
    sel.path.resize(gamma_grid.size());
    parallel_for(gamma_grid.size(), opt.threads, [&](std::size_t g) {
        GammaPathEntry& entry = sel.path[g];
        entry.gamma = gamma_grid[g];
        try {
            Hyperparameters h = hp;
            h.gamma = gamma_grid[g];
            h.lambda = 0.0;
            const MissingFitResult r = fit_missing(Xh, phi, psi, h, cfg, opt.missing);
            double sse = 0.0;
            for (Index i = 0; i < X.n(); ++i) {
                for (Index j = 0; j < X.p(); ++j) {
                    if (X.observed(i, j) && !Xh.observed(i, j)) {
                        const double d = r.state.U(i, j) - X.values()(i, j);
                        sse += d * d;
                    }
                }
            }
            entry.holdout_sse = sse;
            entry.converged = r.state.converged && r.mm_converged;
            entry.mm_iterations = r.mm_iterations;
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
    });
    bool any = false;
    for (std::size_t g = 0; g < sel.path.size(); ++g) {
        const double s = sel.path[g].holdout_sse;
        if (std::isfinite(s) && (!any || s < sel.path[sel.index].holdout_sse)) {
            sel.index = g;
            any = true;
        }
    }
    if (!any) {
        throw std::runtime_error("select_gamma: every grid fit failed");
    }
    sel.gamma = sel.path[sel.index].gamma;
    return sel;
}

struct ClusterAssignment {
    std::vector<int> row_labels;
    std::vector<int> col_labels;
};

namespace detail {

inline double population_sd(const std::vector<double>& v) {
    if (v.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size()));
}

// Links vertex pairs whose distance is at most frac * sd(all pairwise distances).
inline std::vector<int> threshold_components(const Matrix& dist, double frac) {
    const Index m = dist.rows();
    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Index a = 0; a < m; ++a) {
        for (Index b = a + 1; b < m; ++b) {
            all.push_back(dist(a, b));
        }
    }
    const double r = frac * population_sd(all);
    DisjointSets sets(m);
    for (Index a = 0; a < m; ++a) {
        for (Index b = a + 1; b < m; ++b) {
            if (dist(a, b) <= r) {
                sets.unite(a, b);
            }
        }
    }
    return sets.labels();
}

}  // namespace detail

/// Rows are linked when their (w^2 + lambda w)-weighted distance is within
/// r1_frac standard deviations of all such distances; columns with positive
/// weight are linked by plain Euclidean distance with r2_frac. Labels are the
/// connected components, numbered by first appearance. Zero-weight columns
/// all share the label after the last positive-weight cluster.
inline ClusterAssignment assign_clusters(const Matrix& U, const SimplexWeights& w, double lambda, double r1_frac,
                                         double r2_frac) {
    detail::require(U.cols() == w.size(), "assign_clusters: dimension mismatch");
    detail::require(r1_frac >= 0.0 && r2_frac >= 0.0, "assign_clusters: fractions must be >= 0");
    const Index n = U.rows();
    const Index p = U.cols();
    const Vector sw = w.loss_coefficients(lambda).cwiseSqrt();
    const Matrix Uw = U * sw.asDiagonal();
    Matrix row_dist = pairwise_sq_distances(Uw).cwiseMax(0.0).cwiseSqrt();

    ClusterAssignment out;
    out.row_labels = detail::threshold_components(row_dist, r1_frac);

    std::vector<Index> active;
    for (Index l = 0; l < p; ++l) {
        if (w[l] > 0.0) {
            active.push_back(l);
        }
    }
    Matrix cols(static_cast<Index>(active.size()), n);
    for (std::size_t a = 0; a < active.size(); ++a) {
        cols.row(static_cast<Index>(a)) = U.col(active[a]).transpose();
    }
    const Matrix col_dist = pairwise_sq_distances(cols).cwiseMax(0.0).cwiseSqrt();
    const std::vector<int> active_labels = detail::threshold_components(col_dist, r2_frac);
    const int reserved = active_labels.empty() ? 0 : *std::max_element(active_labels.begin(), active_labels.end()) + 1;
    out.col_labels.assign(static_cast<std::size_t>(p), reserved);
    for (std::size_t a = 0; a < active.size(); ++a) {
        out.col_labels[static_cast<std::size_t>(active[a])] = active_labels[a];
    }
    return out;
}

struct RefitResult {
    Matrix U_star;
    int df = 0;
};

/// Bicluster cell means over (row cluster, positive-weight column cluster);
/// all zero-weight columns together share one mean.
inline RefitResult refit_u_star(const Matrix& X, const std::vector<int>& row_labels,
                                const std::vector<int>& col_labels, const SimplexWeights& w) {
    const Index n = X.rows();
    const Index p = X.cols();
    detail::require(static_cast<Index>(row_labels.size()) == n && static_cast<Index>(col_labels.size()) == p &&
                        w.size() == p,
                    "refit_u_star: dimension mismatch");
    const int R = *std::max_element(row_labels.begin(), row_labels.end()) + 1;
    int C = 0;
    bool any_zero = false;
    for (Index l = 0; l < p; ++l) {
        if (w[l] > 0.0) {
            C = std::max(C, col_labels[static_cast<std::size_t>(l)] + 1);
        } else {
            any_zero = true;
        }
    }
    Matrix sum = Matrix::Zero(R, C);
    Matrix count = Matrix::Zero(R, C);
    double zero_sum = 0.0;
    double zero_count = 0.0;
    for (Index i = 0; i < n; ++i) {
        const int r = row_labels[static_cast<std::size_t>(i)];
        detail::require(r >= 0, "refit_u_star: negative row label");
        for (Index l = 0; l < p; ++l) {
            if (w[l] > 0.0) {
                const int c = col_labels[static_cast<std::size_t>(l)];
                sum(r, c) += X(i, l);
                count(r, c) += 1.0;
            } else {
                zero_sum += X(i, l);
                zero_count += 1.0;
            }
        }
    }
    RefitResult out;
    out.U_star.resize(n, p);
    const double zero_mean = zero_count > 0.0 ? zero_sum / zero_count : 0.0;
    for (Index i = 0; i < n; ++i) {
        const int r = row_labels[static_cast<std::size_t>(i)];
        for (Index l = 0; l < p; ++l) {
            if (w[l] > 0.0) {
                const int c = col_labels[static_cast<std::size_t>(l)];
                out.U_star(i, l) = sum(r, c) / count(r, c);
            } else {
                out.U_star(i, l) = zero_mean;
            }
        }
    }
    out.df = R * C + (any_zero ? 1 : 0);
    return out;
}

inline constexpr double ebic_residual_floor = 1e-12;

/// np log(max(RSS, floor) / np) + 2 log(np) df.
inline double ebic(const Matrix& X, const Matrix& U_star, int df) {
    detail::require(X.rows() == U_star.rows() && X.cols() == U_star.cols(), "ebic: dimension mismatch");
    detail::require(df >= 1, "ebic: df must be >= 1");
    const double np = static_cast<double>(X.size());
    const double rss = std::max((U_star - X).squaredNorm(), ebic_residual_floor);
    return np * std::log(rss / np) + 2.0 * std::log(np) * static_cast<double>(df);
}

struct BiclusterModel {
    std::vector<int> row_labels;
    std::vector<int> col_labels;
    Matrix U_star;
    int df = 0;
    double ebic = 0.0;
    double gamma = 0.0;
    double lambda = 0.0;
    SimplexWeights w;
};

/// Fit at (gamma, lambda), assign clusters and score the refit.
inline BiclusterModel build_model(const Matrix& X, const FitState& st, double gamma, double lambda, double r1_frac,
                                  double r2_frac) {
    BiclusterModel m;
    const ClusterAssignment ca = assign_clusters(st.U, st.w, lambda, r1_frac, r2_frac);
    RefitResult rf = refit_u_star(X, ca.row_labels, ca.col_labels, st.w);
    m.row_labels = ca.row_labels;
    m.col_labels = ca.col_labels;
    m.U_star = std::move(rf.U_star);
    m.df = rf.df;
    m.ebic = ebic(X, m.U_star, m.df);
    m.gamma = gamma;
    m.lambda = lambda;
    m.w = st.w;
    return m;
}

struct LambdaPathEntry {
    double lambda = 0.0;
    double ebic = std::numeric_limits<double>::quiet_NaN();
    int df = 0;
    int n_row_clusters = 0;
    int n_col_clusters = 0;
    Index num_zero_weights = 0;
    bool converged = false;
    std::string error;
};

struct LambdaSelection {
    BiclusterModel model;
    FitState state;
    std::size_t index = 0;
    std::vector<LambdaPathEntry> path;
};

/// Full fits over the lambda grid at gamma_star; the lowest eBIC wins and ties
/// go to the earlier grid entry. Requires complete data.
inline LambdaSelection select_lambda(const DataMatrix& X, const AffinityGraph& phi, const AffinityGraph& psi,
                                     double gamma_star, const std::vector<double>& lambda_grid,
                                     const Hyperparameters& hp, const PalmConfig& cfg,
                                     const TuningOptions& opt = {}) {
    detail::require(!lambda_grid.empty(), "select_lambda: empty lambda grid");
    detail::require(!X.has_mask(), "select_lambda: impute missing entries first");
    std::vector<std::optional<BiclusterModel>> models(lambda_grid.size());
    std::vector<std::optional<FitState>> states(lambda_grid.size());
    LambdaSelection sel;
    sel.path.resize(lambda_grid.size());
    parallel_for(lambda_grid.size(), opt.threads, [&](std::size_t g) {
        LambdaPathEntry& entry = sel.path[g];
        entry.lambda = lambda_grid[g];
        try {
            Hyperparameters h = hp;
            h.gamma = gamma_star;
            h.lambda = lambda_grid[g];
            FitState st = fit(X, phi, psi, h, cfg);
            BiclusterModel m = build_model(X.values(), st, gamma_star, h.lambda, opt.r1_frac, opt.r2_frac);
            entry.ebic = m.ebic;
            entry.df = m.df;
            entry.n_row_clusters = *std::max_element(m.row_labels.begin(), m.row_labels.end()) + 1;
            entry.num_zero_weights = (st.w.values().array() == 0.0).count();
            entry.n_col_clusters = *std::max_element(m.col_labels.begin(), m.col_labels.end()) + 1 -
                                   (entry.num_zero_weights > 0 ? 1 : 0);
            entry.converged = st.converged;
            models[g] = std::move(m);
            states[g] = std::move(st);
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
    });
    bool any = false;
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
        if (models[g] && (!any || models[g]->ebic < models[sel.index]->ebic)) {
            sel.index = g;
            any = true;
        }
    }
    if (!any) {
        throw std::runtime_error("select_lambda: every grid fit failed");
    }
    sel.model = std::move(*models[sel.index]);
    sel.state = std::move(*states[sel.index]);
    return sel;
}

}  // namespace bicoclust
