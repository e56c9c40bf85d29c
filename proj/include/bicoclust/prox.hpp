#pragma once

// Proximal building blocks for the two PALM blocks: Euclidean projection onto
// the probability simplex, and the convex (bi)clustering proximal maps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "core.hpp"

namespace bicoclust {

struct CvxBiclustConfig {
    double inner_tol = 1e-6;
    int inner_max_iter = 2000;
    double outer_tol = 1e-6;
    int outer_max_iter = 200;

    void validate() const {
        detail::require(inner_tol > 0.0 && outer_tol > 0.0, "CvxBiclustConfig: tolerances must be positive");
        detail::require(inner_max_iter >= 1 && outer_max_iter >= 1, "CvxBiclustConfig: iteration caps must be >= 1");
    }
};

/// Sort-and-threshold projection of v onto {w >= 0, sum w = 1}.
inline SimplexWeights project_simplex(const Vector& v) {
    detail::require(v.size() >= 1, "project_simplex: empty vector");
    detail::require(detail::all_finite(v), "project_simplex: non-finite input");
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) {
            theta = t;
        }
    }
    Vector w = (v.array() - theta).max(0.0).matrix();
    const double s = w.sum();
    if (s > 0.0) {
        w /= s;
    } else {
        // Only reachable through rounding with a single dominant entry.
        Index best = 0;
        v.maxCoeff(&best);
        w.setZero();
        w(best) = 1.0;
    }
    return SimplexWeights(std::move(w));
}

/// Closed-form minimizer of threshold ||u - v|| + 1/2 ||u - a||^2 + 1/2 ||v - b||^2.
inline std::pair<Vector, Vector> prox_fusion_vector_pair(const Vector& a, const Vector& b, double threshold) {
    detail::require(a.size() == b.size(), "prox_fusion_vector_pair: size mismatch");
    detail::require(threshold >= 0.0, "prox_fusion_vector_pair: threshold must be >= 0");
    const Vector diff = a - b;
    const double gap = diff.norm();
    if (gap == 0.0 || threshold == 0.0) {
        return {a, b};
    }
    const Vector s = (std::min(threshold, gap / 2.0) / gap) * diff;
    return {a - s, b + s};
}

struct ProxResult {
    Matrix U;
    bool converged = true;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> objective_trace;
};

/// ADMM for  gamma sum_e w_e ||U_i - U_j|| + 1/2 ||U - M||_F^2  over the rows
/// of M, splitting V_e = U_i - U_j for every edge. The U update solves
/// (I + rho L) U = M + B^T (rho V - Lambda) with L the unweighted Laplacian of
/// the edge set (cached sparse LDL^T); V is a group soft-threshold and Lambda
/// the unscaled multiplier. rho follows residual balancing. V, Lambda and rho
/// persist between calls as a warm start.
class ConvexClusteringSolver {
public:
    ConvexClusteringSolver() = default;

    ConvexClusteringSolver(AffinityGraph g, CvxBiclustConfig cfg) : graph_(std::move(g)), cfg_(cfg) {
        cfg_.validate();
    }

    const AffinityGraph& graph() const { return graph_; }

    void set_graph(AffinityGraph g) {
        graph_ = std::move(g);
        reset();
    }

    void reset() {
        V_.resize(0, 0);
        Lambda_.resize(0, 0);
        rho_ = 1.0;
        factored_ = false;
    }

    ProxResult solve(const Matrix& M, double gamma) {
        detail::require(M.rows() == graph_.dimension(), "solve_convex_clustering: graph dimension mismatch");
        detail::require(std::isfinite(gamma) && gamma >= 0.0, "solve_convex_clustering: gamma must be >= 0");
        ProxResult out;
        if (gamma == 0.0 || graph_.empty()) {
            out.U = M;
            return out;
        }
        const auto& edges = graph_.edges();
        const auto E = static_cast<Index>(edges.size());
        const Index d = M.cols();
        if (V_.rows() != E || V_.cols() != d) {
            V_ = Matrix::Zero(E, d);
            Lambda_ = Matrix::Zero(E, d);
        }
        if (!factored_) {
            factorize();
        }
        const double scale = std::max(M.norm(), std::numeric_limits<double>::min());
        Matrix rhs(M.rows(), d);
        Matrix U(M.rows(), d);
        Matrix V_old(E, d);
        Matrix dual_acc(M.rows(), d);
        Eigen::RowVectorXd diff(d);
        out.converged = false;
        for (int it = 1; it <= cfg_.inner_max_iter; ++it) {
            rhs = M;
            for (Index e = 0; e < E; ++e) {
                const auto& ed = edges[static_cast<std::size_t>(e)];
                diff = rho_ * V_.row(e) - Lambda_.row(e);
                rhs.row(ed.i) += diff;
                rhs.row(ed.j) -= diff;
            }
            U = ldlt_.solve(rhs);
            V_old = V_;
            double r2 = 0.0;
            for (Index e = 0; e < E; ++e) {
                const auto& ed = edges[static_cast<std::size_t>(e)];
                diff = U.row(ed.i) - U.row(ed.j);
                auto v = V_.row(e);
                v = diff + Lambda_.row(e) / rho_;
                const double t = v.norm();
                const double kappa = gamma * ed.weight / rho_;
                if (t <= kappa) {
                    v.setZero();
                } else {
                    v *= (1.0 - kappa / t);
                }
                diff -= v;
                r2 += diff.squaredNorm();
                Lambda_.row(e) += rho_ * diff;
            }
            dual_acc.setZero();
            for (Index e = 0; e < E; ++e) {
                const auto& ed = edges[static_cast<std::size_t>(e)];
                diff = V_.row(e) - V_old.row(e);
                dual_acc.row(ed.i) += diff;
                dual_acc.row(ed.j) -= diff;
            }
            const double r = std::sqrt(r2);
            const double s = rho_ * dual_acc.norm();
            out.iterations = it;
            out.residual = std::max(r, s) / scale;
            if (r <= cfg_.inner_tol * scale && s <= cfg_.inner_tol * scale) {
                out.converged = true;
                break;
            }
            if (it % 10 == 0) {
                if (r > 10.0 * s) {
                    rho_ *= 2.0;
                    factorize();
                } else if (s > 10.0 * r) {
                    rho_ /= 2.0;
                    factorize();
                }
            }
        }
        out.U = std::move(U);
        return out;
    }

private:
    void factorize() {
        const Index m = graph_.dimension();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(m) + 4 * graph_.num_edges());
        for (Index v = 0; v < m; ++v) {
            trips.emplace_back(v, v, 1.0);
        }
        for (const auto& e : graph_.edges()) {
            trips.emplace_back(e.i, e.i, rho_);
            trips.emplace_back(e.j, e.j, rho_);
            trips.emplace_back(e.i, e.j, -rho_);
            trips.emplace_back(e.j, e.i, -rho_);
        }
        Eigen::SparseMatrix<double> K(m, m);
        K.setFromTriplets(trips.begin(), trips.end());
        ldlt_.compute(K);
        detail::require(ldlt_.info() == Eigen::Success, "ConvexClusteringSolver: factorization failed");
        factored_ = true;
    }

    AffinityGraph graph_;
    CvxBiclustConfig cfg_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    double rho_ = 1.0;
    bool factored_ = false;
    Matrix V_;
    Matrix Lambda_;
};

inline ProxResult solve_convex_clustering(const Matrix& M, const AffinityGraph& g, double gamma, Axis axis,
                                          const CvxBiclustConfig& cfg = {}) {
    ConvexClusteringSolver solver(g, cfg);
    if (axis == Axis::rows) {
        return solver.solve(M, gamma);
    }
    ProxResult out = solver.solve(M.transpose(), gamma);
    out.U.transposeInPlace();
    return out;
}

/// Convex biclustering prox  gamma [row fusion + column fusion] + 1/2 ||U - M||^2.
///
/// Dykstra-like alternation of the row and column proximal maps, written as
/// block coordinate descent on the dual with correction terms P (row block)
/// and Q (column block) kept so that U = M - P - Q:
///     Y = prox_row(M - Q),   P = M - Q - Y,
///     U = prox_col(M - P),   Q = M - P - U.
/// This converges to the joint minimizer rather than a cycle of the two maps,
/// and from any initial Q, so Q and the inner ADMM states are reused between
/// calls.
class BiclusteringSolver {
public:
    BiclusteringSolver() = default;

    BiclusteringSolver(const AffinityGraph& phi, const AffinityGraph& psi, CvxBiclustConfig cfg)
        : rows_(phi, cfg), cols_(psi, cfg), cfg_(cfg) {}

    const CvxBiclustConfig& config() const { return cfg_; }
    const AffinityGraph& phi() const { return rows_.graph(); }
    const AffinityGraph& psi() const { return cols_.graph(); }

    void reset() {
        rows_.reset();
        cols_.reset();
        Q_.resize(0, 0);
    }

    /// Swaps in new affinities. Q stays as the warm start; the inner ADMM
    /// states are tied to the old edge sets and are dropped.
    void set_graphs(const AffinityGraph& phi, const AffinityGraph& psi) {
        rows_.set_graph(phi);
        cols_.set_graph(psi);
    }

    ProxResult solve(const Matrix& M, double gamma) {
        detail::require(M.rows() == phi().dimension() && M.cols() == psi().dimension(),
                        "solve_convex_biclustering: graph dimensions do not match the matrix");
        detail::require(std::isfinite(gamma) && gamma >= 0.0, "solve_convex_biclustering: gamma must be >= 0");
        ProxResult out;
        if (gamma == 0.0) {
            out.U = M;
            return out;
        }
        if (Q_.rows() != M.rows() || Q_.cols() != M.cols()) {
            Q_ = Matrix::Zero(M.rows(), M.cols());
        }
        const double scale = std::max(M.norm(), std::numeric_limits<double>::min());
        Matrix U_prev = M;
        Matrix P(M.rows(), M.cols());
        Matrix U;
        out.converged = false;
        bool inner_ok = true;
        for (int m = 1; m <= cfg_.outer_max_iter; ++m) {
            ProxResult row = rows_.solve(M - Q_, gamma);
            P = M - Q_ - row.U;
            ProxResult col = cols_.solve((M - P).transpose(), gamma);
            U = col.U.transpose();
            Q_ = M - P - U;
            inner_ok = row.converged && col.converged;
            out.iterations = m;
            out.objective_trace.push_back(gamma * fusion_penalty(U, phi(), psi()) + 0.5 * (U - M).squaredNorm());
            out.residual = (U - U_prev).norm() / scale;
            if (out.residual <= cfg_.outer_tol) {
                out.converged = inner_ok;
                break;
            }
            U_prev = U;
        }
        out.U = std::move(U);
        return out;
    }

private:
    ConvexClusteringSolver rows_;
    ConvexClusteringSolver cols_;
    CvxBiclustConfig cfg_;
    Matrix Q_;
};

inline ProxResult solve_convex_biclustering(const Matrix& M, const AffinityGraph& phi, const AffinityGraph& psi,
                                            double gamma, const CvxBiclustConfig& cfg = {}) {
    BiclusteringSolver solver(phi, psi, cfg);
    return solver.solve(M, gamma);
}

}  // namespace bicoclust
