#pragma once

// Proximal alternating linearized minimization for the biconvex objective,
// with optional adaptive GKNN affinity refresh.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "graph.hpp"
#include "prox.hpp"

namespace bicoclust {

struct PalmConfig {
    static constexpr int never = std::numeric_limits<int>::max();

    double tol = Tolerances::convergence;
    int max_outer_iter = 200;
    double nu_floor = 1e-8;
    bool adaptive = false;
    int refresh_affinities_every = 1;
    CvxBiclustConfig prox;

    void validate() const {
        detail::require(tol > 0.0, "PalmConfig: tol must be > 0");
        detail::require(nu_floor > 0.0, "PalmConfig: nu_floor must be > 0");
        detail::require(max_outer_iter >= 1, "PalmConfig: max_outer_iter must be >= 1");
        detail::require(refresh_affinities_every >= 1, "PalmConfig: refresh_affinities_every must be >= 1");
        prox.validate();
    }
};

/// Lipschitz constant of the U-gradient: max_l (w_l^2 + lambda w_l).
inline double lipschitz_l1(const SimplexWeights& w, double lambda) { return w.loss_coefficients(lambda).maxCoeff(); }

/// Lipschitz constant of the w-gradient: sqrt(sum_l D_l(U)^2).
inline double lipschitz_l2(const Matrix& X, const Matrix& U) { return column_sq_residuals(X, U).norm(); }

inline double lipschitz_l2(const DataMatrix& X, const Matrix& U) { return lipschitz_l2(X.values(), U); }

inline double u_step_size(const SimplexWeights& w, double lambda) {
    return std::max(1.0, 2.0 * lipschitz_l1(w, lambda));
}

/// Gradient step on the smooth loss: U0 - (1/nu1) (U0 - X) diag(w^2 + lambda w).
inline Matrix u_surrogate(const Matrix& X, const Matrix& U0, const SimplexWeights& w, double lambda, double nu1) {
    const Vector c = w.loss_coefficients(lambda) / nu1;
    Matrix S = U0;
    S.noalias() -= (U0 - X) * c.asDiagonal();
    return S;
}

namespace detail {

struct UStepOutcome {
    ProxResult prox;
    double nu1 = 1.0;
    int refinements = 0;
    bool rejected = false;
};

// The prox is solved inexactly. If its output scores worse on the prox
// subproblem than the current iterate, it is re-solved from a cold start with
// tolerances tightened 100x at a time (at most three times); if that still
// fails, the current iterate is kept. Any point no worse than U0 on the
// subproblem preserves PALM's sufficient decrease.
inline UStepOutcome u_step(const Matrix& X, const Matrix& U0, const SimplexWeights& w, const Hyperparameters& hp,
                           BiclusteringSolver& solver) {
    UStepOutcome out;
    out.nu1 = u_step_size(w, hp.lambda);
    const Matrix S = u_surrogate(X, U0, w, hp.lambda, out.nu1);
    const double g = hp.gamma / out.nu1;
    out.prox = solver.solve(S, g);
    if (g == 0.0) {
        return out;
    }
    auto sub = [&](const Matrix& U) {
        return g * fusion_penalty(U, solver.phi(), solver.psi()) + 0.5 * (U - S).squaredNorm();
    };
    const double current = sub(U0);
    if (sub(out.prox.U) <= current) {
        return out;
    }
    CvxBiclustConfig tight = solver.config();
    for (int attempt = 1; attempt <= 3; ++attempt) {
        tight.inner_tol *= 1e-2;
        tight.outer_tol *= 1e-2;
        tight.inner_max_iter *= 4;
        tight.outer_max_iter *= 4;
        out.refinements = attempt;
        ProxResult retry = solve_convex_biclustering(S, solver.phi(), solver.psi(), g, tight);
        if (sub(retry.U) <= current) {
            out.prox = std::move(retry);
            return out;
        }
    }
    out.prox.U = U0;
    out.rejected = true;
    return out;
}

}  // namespace detail

/// One U block update from `state.U`, `state.w_iterate` and the state's graphs.
inline ProxResult u_step(const DataMatrix& X, const FitState& state, const Hyperparameters& hp,
                         const PalmConfig& cfg) {
    BiclusteringSolver solver(state.phi, state.psi, cfg.prox);
    return detail::u_step(X.values(), state.U, state.w_iterate, hp, solver).prox;
}

/// Projected gradient step on w with nu2 = max(nu_floor, 2 L2(U_next)).
inline SimplexWeights w_step(const Matrix& X, const Matrix& U_next, const SimplexWeights& w_prev, double lambda,
                             double nu_floor, double* nu2_out = nullptr) {
    const Vector D = column_sq_residuals(X, U_next);
    const double nu2 = std::max(nu_floor, 2.0 * D.norm());
    if (nu2_out) {
        *nu2_out = nu2;
    }
    const Vector grad = ((w_prev.values().array() + lambda / 2.0) * D.array()).matrix();
    return project_simplex(w_prev.values() - grad / nu2);
}

inline SimplexWeights w_step(const DataMatrix& X, const Matrix& U_next, const SimplexWeights& w_prev,
                             const Hyperparameters& hp, double nu_floor) {
    return w_step(X.values(), U_next, w_prev, hp.lambda, nu_floor);
}

/// Exact minimizer over the simplex of 1/2 sum_l (w_l^2 + lambda w_l) D_l.
/// Active weights satisfy w_l = mu / D_l - lambda / 2; when some D_l vanish,
/// those features carry all the mass, split evenly.
inline SimplexWeights final_w_refinement(const Matrix& X, const Matrix& U, double lambda) {
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "final_w_refinement: lambda must be >= 0");
    const Vector D = column_sq_residuals(X, U);
    const Index p = D.size();
    Vector w = Vector::Zero(p);
    const Index zeros = (D.array() == 0.0).count();
    if (zeros > 0) {
        for (Index l = 0; l < p; ++l) {
            if (D(l) == 0.0) {
                w(l) = 1.0 / static_cast<double>(zeros);
            }
        }
        return SimplexWeights(std::move(w));
    }
    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return D(a) < D(b); });
    double inv_sum = 0.0;
    double mu = 0.0;
    for (Index m = 0; m < p; ++m) {
        const double d = D(order[static_cast<std::size_t>(m)]);
        const double next_inv = inv_sum + 1.0 / d;
        const double next_mu = (1.0 + static_cast<double>(m + 1) * lambda / 2.0) / next_inv;
        if (m > 0 && next_mu / d - lambda / 2.0 <= 0.0) {
            break;
        }
        inv_sum = next_inv;
        mu = next_mu;
    }
    for (Index l = 0; l < p; ++l) {
        w(l) = std::max(0.0, mu / D(l) - lambda / 2.0);
    }
    w /= w.sum();
    return SimplexWeights(std::move(w));
}

inline SimplexWeights final_w_refinement(const DataMatrix& X, const Matrix& U, double lambda) {
    return final_w_refinement(X.values(), U, lambda);
}

namespace detail {

// User-supplied graphs that are disconnected get bridges weighted by the
// smallest existing weight (or the raw kernel weight for an empty graph).
inline AffinityGraph ensure_connected(const AffinityGraph& g, const Matrix& X, Axis axis, double tau,
                                      std::vector<std::string>& warnings) {
    if (is_connected(g)) {
        return g;
    }
    double scale = 1.0;
    if (!g.empty()) {
        scale = std::numeric_limits<double>::infinity();
        for (const auto& e : g.edges()) {
            scale = std::min(scale, e.weight);
        }
    }
    const Matrix sq = pairwise_sq_distances(axis_vectors(X, axis));
    warnings.push_back(std::string("disconnected ") + to_string(axis) + " affinity graph repaired with bridging edges");
    if (g.empty()) {
        const Index scale_dim = axis == Axis::rows ? X.cols() : X.rows();
        return connect_components(g, sq, tau, scale_dim);
    }
    return connect_components(g, sq, [scale](double) { return scale; });
}

}  // namespace detail

/// Alternates U and w block updates until a U step from (U^k, w^k) moves U by
/// at most cfg.tol * ||U^k||_F, or the cap hits. That step is a stationarity
/// residual at U^k, so on convergence U^k is returned and the step is dropped;
/// one more iteration from the returned state reproduces it. With
/// cfg.adaptive, both graphs are rebuilt from U^{k+1} as normalized GKNN
/// affinities every cfg.refresh_affinities_every iterations. The returned w is
/// the exact w minimizer given the final U.
inline FitState fit(const DataMatrix& X, const AffinityGraph& phi, const AffinityGraph& psi,
                    const Hyperparameters& hp, const PalmConfig& cfg,
                    const std::optional<SimplexWeights>& w0 = std::nullopt,
                    const std::optional<Matrix>& U0 = std::nullopt) {
    detail::require(!X.has_mask(), "fit: masked data requires fit_missing");
    hp.validate(X.n(), X.p());
    cfg.validate();
    detail::require(phi.dimension() == X.n() && psi.dimension() == X.p(), "fit: graph dimensions do not match data");
    const Matrix& Xv = X.values();

    FitState state;
    state.phi = detail::ensure_connected(phi, Xv, Axis::rows, hp.tau, state.warnings);
    state.psi = detail::ensure_connected(psi, Xv, Axis::columns, hp.tau, state.warnings);
    state.U = U0 ? *U0 : Xv;
    detail::require(state.U.rows() == X.n() && state.U.cols() == X.p(), "fit: initial U has wrong dimensions");
    state.w_iterate = w0 ? *w0 : SimplexWeights::uniform(X.p());
    detail::require(state.w_iterate.size() == X.p(), "fit: initial w has wrong length");
    state.w = state.w_iterate;

    BiclusteringSolver solver(state.phi, state.psi, cfg.prox);
    state.objective_trace.push_back(
        objective(Xv, state.U, state.w_iterate, state.phi, state.psi, hp.gamma, hp.lambda));

    for (int k = 0; k < cfg.max_outer_iter; ++k) {
        IterationRecord rec;
        rec.iteration = k + 1;
        auto step = detail::u_step(Xv, state.U, state.w_iterate, hp, solver);
        rec.nu1 = step.nu1;
        rec.prox_iterations = step.prox.iterations;
        rec.prox_converged = step.prox.converged;
        rec.prox_residual = step.prox.residual;
        rec.prox_refinements = step.refinements;
        rec.step_rejected = step.rejected;
        Matrix& U_next = step.prox.U;
        const double moved = (U_next - state.U).norm();
        const double size = state.U.norm();
        rec.u_change = moved == 0.0 ? 0.0 : moved / size;
        state.iterations = k + 1;
        // A rejected step leaves U in place without certifying stationarity.
        if (rec.u_change <= cfg.tol && !rec.step_rejected) {
            rec.objective = state.objective_trace.back();
            state.diagnostics.push_back(rec);
            state.converged = true;
            break;
        }

        state.w_iterate = w_step(Xv, U_next, state.w_iterate, hp.lambda, cfg.nu_floor, &rec.nu2);
        state.U = std::move(U_next);

        if (cfg.adaptive && (k + 1) % cfg.refresh_affinities_every == 0) {
            GknnGraphs g = gknn_graphs(state.U, hp);
            if (g.phi_repaired || g.psi_repaired) {
                state.warnings.push_back("iteration " + std::to_string(k + 1) +
                                         ": adaptive affinities disconnected, repaired with bridging edges");
            }
            state.phi = std::move(g.phi);
            state.psi = std::move(g.psi);
            solver.set_graphs(state.phi, state.psi);
            rec.affinities_refreshed = true;
        }

        rec.objective = objective(Xv, state.U, state.w_iterate, state.phi, state.psi, hp.gamma, hp.lambda);
        state.objective_trace.push_back(rec.objective);
        state.diagnostics.push_back(rec);
    }
    state.w = final_w_refinement(Xv, state.U, hp.lambda);
    state.final_objective = objective(Xv, state.U, state.w, state.phi, state.psi, hp.gamma, hp.lambda);
    return state;
}

/// Fit with GKNN affinities built from X itself.
inline FitState fit(const DataMatrix& X, const Hyperparameters& hp, const PalmConfig& cfg) {
    GknnGraphs g = gknn_graphs(X.values(), hp);
    return fit(X, g.phi, g.psi, hp, cfg);
}

}  // namespace bicoclust
