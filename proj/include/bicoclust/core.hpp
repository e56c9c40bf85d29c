#pragma once

// Domain types and the biconvex biclustering objective shared by every
// other header in the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bicoclust {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Single source of truth for numeric slack used across the library and tests.
struct Tolerances {
    static constexpr double simplex = 1e-10;
    static constexpr double monotone_slack = 1e-8;
    static constexpr double convergence = 1e-4;
};

enum class Axis { rows, columns };

inline const char* to_string(Axis axis) { return axis == Axis::rows ? "rows" : "columns"; }

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

}  // namespace detail

/// Dense n x p observations with an optional observed-entry mask
/// (true = observed). Unobserved cells of `values` are ignored.
class DataMatrix {
public:
    DataMatrix() = default;

    explicit DataMatrix(Matrix values) : values_(std::move(values)) { validate(); }

    DataMatrix(Matrix values, BoolMatrix mask) : values_(std::move(values)), mask_(std::move(mask)) {
        validate();
    }

    Index n() const { return values_.rows(); }
    Index p() const { return values_.cols(); }
    const Matrix& values() const { return values_; }
    bool has_mask() const { return mask_.has_value(); }
    const BoolMatrix& mask() const { return *mask_; }
    bool observed(Index i, Index j) const { return !mask_ || (*mask_)(i, j); }

    Index num_missing() const {
        return mask_ ? static_cast<Index>(mask_->size() - mask_->count()) : 0;
    }

private:
    void validate() const {
        detail::require(values_.rows() >= 2 && values_.cols() >= 2, "DataMatrix: need n >= 2 and p >= 2");
        if (mask_) {
            detail::require(mask_->rows() == values_.rows() && mask_->cols() == values_.cols(),
                            "DataMatrix: mask dimensions do not match values");
            for (Index j = 0; j < values_.cols(); ++j) {
                detail::require(mask_->col(j).any(),
                                "DataMatrix: column " + std::to_string(j) + " has no observed entries");
            }
        }
        for (Index i = 0; i < values_.rows(); ++i) {
            for (Index j = 0; j < values_.cols(); ++j) {
                if (observed(i, j)) {
                    detail::require(std::isfinite(values_(i, j)), "DataMatrix: non-finite observed value");
                }
            }
        }
    }

    Matrix values_;
    std::optional<BoolMatrix> mask_;
};

struct Edge {
    Index i = 0;
    Index j = 0;
    double weight = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Sparse symmetric affinities over `dimension` vertices. Only the upper
/// triangle is stored and the weights are the square-rooted coefficients that
/// multiply the fusion norms directly.
class AffinityGraph {
public:
    AffinityGraph() = default;

    AffinityGraph(Index dimension, std::vector<Edge> edges) : dimension_(dimension), edges_(std::move(edges)) {
        detail::require(dimension_ >= 1, "AffinityGraph: dimension must be positive");
        for (auto& e : edges_) {
            if (e.i > e.j) {
                std::swap(e.i, e.j);
            }
            detail::require(e.i != e.j, "AffinityGraph: self-loops are not allowed");
            detail::require(e.i >= 0 && e.j < dimension_, "AffinityGraph: edge endpoint out of range");
            detail::require(std::isfinite(e.weight) && e.weight > 0.0,
                            "AffinityGraph: edge weights must be positive and finite");
        }
        std::sort(edges_.begin(), edges_.end(),
                  [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
        for (std::size_t e = 1; e < edges_.size(); ++e) {
            detail::require(edges_[e - 1].i != edges_[e].i || edges_[e - 1].j != edges_[e].j,
                            "AffinityGraph: duplicate edge");
        }
    }

    Index dimension() const { return dimension_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t num_edges() const { return edges_.size(); }
    bool empty() const { return edges_.empty(); }

    double total_weight() const {
        double s = 0.0;
        for (const auto& e : edges_) {
            s += e.weight;
        }
        return s;
    }

    /// Same vertex pairs in the same order (weights may differ).
    bool same_topology(const AffinityGraph& other) const {
        if (dimension_ != other.dimension_ || edges_.size() != other.edges_.size()) {
            return false;
        }
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            if (edges_[e].i != other.edges_[e].i || edges_[e].j != other.edges_[e].j) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const AffinityGraph&, const AffinityGraph&) = default;

private:
    Index dimension_ = 0;
    std::vector<Edge> edges_;
};

/// Nonnegative feature weights on the probability simplex.
class SimplexWeights {
public:
    SimplexWeights() = default;

    explicit SimplexWeights(Vector w) : w_(std::move(w)) {
        detail::require(w_.size() >= 1, "SimplexWeights: empty weight vector");
        detail::require(detail::all_finite(w_), "SimplexWeights: non-finite weight");
        detail::require((w_.array() >= 0.0).all(), "SimplexWeights: negative weight");
        detail::require(std::abs(w_.sum() - 1.0) <= Tolerances::simplex, "SimplexWeights: weights must sum to 1");
    }

    static SimplexWeights uniform(Index p) { return SimplexWeights(Vector::Constant(p, 1.0 / static_cast<double>(p))); }

    Index size() const { return w_.size(); }
    const Vector& values() const { return w_; }
    double operator[](Index l) const { return w_(l); }

    /// Per-column loss coefficients w^2 + lambda w.
    Vector loss_coefficients(double lambda) const { return (w_.array().square() + lambda * w_.array()).matrix(); }

private:
    Vector w_;
};

struct Hyperparameters {
    double gamma = 1.0;
    double lambda = 0.0;
    double tau = 1.0;
    Index k_row = 5;
    Index k_col = 5;

    void validate(Index n, Index p) const {
        detail::require(std::isfinite(gamma) && gamma >= 0.0, "Hyperparameters: gamma must be >= 0");
        detail::require(std::isfinite(lambda) && lambda >= 0.0, "Hyperparameters: lambda must be >= 0");
        detail::require(std::isfinite(tau) && tau > 0.0, "Hyperparameters: tau must be > 0");
        detail::require(k_row >= 1 && k_row < n, "Hyperparameters: need 1 <= k_row < n");
        detail::require(k_col >= 1 && k_col < p, "Hyperparameters: need 1 <= k_col < p");
    }
};

/// Per-iteration PALM diagnostics.
struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double nu1 = 0.0;
    double nu2 = 0.0;
    double u_change = 0.0;
    int prox_iterations = 0;
    bool prox_converged = true;
    double prox_residual = 0.0;
    int prox_refinements = 0;
    bool step_rejected = false;
    bool affinities_refreshed = false;
};

struct FitState {
    Matrix U;
    SimplexWeights w;          // after the terminal w refinement
    SimplexWeights w_iterate;  // last PALM iterate, before refinement
    AffinityGraph phi;
    AffinityGraph psi;
    std::vector<double> objective_trace;
    double final_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<IterationRecord> diagnostics;
    std::vector<std::string> warnings;
};

/// Sum over columns of (w_l^2 + lambda w_l) ||A_.l||^2.
inline double weighted_sq_norm(const Matrix& A, const SimplexWeights& w, double lambda) {
    detail::require(A.cols() == w.size(), "weighted_sq_norm: dimension mismatch");
    detail::require(detail::all_finite(A) && std::isfinite(lambda), "weighted_sq_norm: non-finite input");
    const Vector c = w.loss_coefficients(lambda);
    double total = 0.0;
    for (Index l = 0; l < A.cols(); ++l) {
        total += c(l) * A.col(l).squaredNorm();
    }
    return total;
}

/// D_l(U) = ||X_.l - U_.l||^2 for every column l.
inline Vector column_sq_residuals(const Matrix& X, const Matrix& U) {
    detail::require(X.rows() == U.rows() && X.cols() == U.cols(), "column_sq_residuals: dimension mismatch");
    return (X - U).colwise().squaredNorm().transpose();
}

inline Vector column_sq_residuals(const DataMatrix& X, const Matrix& U) { return column_sq_residuals(X.values(), U); }

/// Sum over stored edges of weight * ||row_i - row_j||, along the given axis.
inline double fusion_penalty(const Matrix& U, const AffinityGraph& g, Axis axis) {
    const Index dim = axis == Axis::rows ? U.rows() : U.cols();
    detail::require(g.dimension() == dim, "fusion_penalty: graph dimension does not match the matrix");
    double total = 0.0;
    if (axis == Axis::rows) {
        for (const auto& e : g.edges()) {
            total += e.weight * (U.row(e.i) - U.row(e.j)).norm();
        }
    } else {
        for (const auto& e : g.edges()) {
            total += e.weight * (U.col(e.i) - U.col(e.j)).norm();
        }
    }
    return total;
}

inline double fusion_penalty(const Matrix& U, const AffinityGraph& phi, const AffinityGraph& psi) {
    return fusion_penalty(U, phi, Axis::rows) + fusion_penalty(U, psi, Axis::columns);
}

inline double objective(const Matrix& X, const Matrix& U, const SimplexWeights& w, const AffinityGraph& phi,
                        const AffinityGraph& psi, double gamma, double lambda) {
    detail::require(X.rows() == U.rows() && X.cols() == U.cols(), "objective: dimension mismatch");
    return gamma * fusion_penalty(U, phi, psi) + 0.5 * weighted_sq_norm(X - U, w, lambda);
}

/// Full biconvex objective at the state's iterate. Masked data belongs to the
/// hold-out objective in tuning.hpp, not here.
inline double objective(const DataMatrix& X, const FitState& state, const Hyperparameters& hp) {
    detail::require(!X.has_mask(), "objective: masked data requires the hold-out objective");
    return objective(X.values(), state.U, state.w, state.phi, state.psi, hp.gamma, hp.lambda);
}

}  // namespace bicoclust
