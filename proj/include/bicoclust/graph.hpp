#pragma once

// Gaussian-kernel kNN affinities, their adaptive normalization, and the
// spectral utilities (incidence, Laplacian, algebraic connectivity).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core.hpp"

namespace bicoclust {

/// Union-find over [0, n) with path halving.
class DisjointSets {
public:
    explicit DisjointSets(Index n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
        std::iota(parent_.begin(), parent_.end(), Index{0});
    }

    Index find(Index x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        if (size_[a] < size_[b]) {
            std::swap(a, b);
        }
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

    /// Component label per element, contiguous from 0 in order of first appearance.
    std::vector<int> labels() {
        std::vector<int> out(parent_.size(), -1);
        std::vector<int> root_label(parent_.size(), -1);
        int next = 0;
        for (std::size_t v = 0; v < parent_.size(); ++v) {
            const auto r = static_cast<std::size_t>(find(static_cast<Index>(v)));
            if (root_label[r] < 0) {
                root_label[r] = next++;
            }
            out[v] = root_label[r];
        }
        return out;
    }

private:
    std::vector<Index> parent_;
    std::vector<Index> size_;
};

inline std::vector<int> connected_components(const AffinityGraph& g) {
    DisjointSets sets(g.dimension());
    for (const auto& e : g.edges()) {
        sets.unite(e.i, e.j);
    }
    return sets.labels();
}

inline int num_components(const AffinityGraph& g) {
    const auto labels = connected_components(g);
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

inline bool is_connected(const AffinityGraph& g) { return num_components(g) == 1; }

/// The vectors along `axis` as rows of a matrix.
inline Matrix axis_vectors(const Matrix& M, Axis axis) {
    if (axis == Axis::rows) {
        return M;
    }
    return M.transpose();
}

/// Squared Euclidean distances between all rows of `points`.
inline Matrix pairwise_sq_distances(const Matrix& points) {
    const Index m = points.rows();
    Matrix d(m, m);
    for (Index a = 0; a < m; ++a) {
        d(a, a) = 0.0;
        for (Index b = a + 1; b < m; ++b) {
            const double v = (points.row(a) - points.row(b)).squaredNorm();
            d(a, b) = v;
            d(b, a) = v;
        }
    }
    return d;
}

/// Exact nearest neighbors from full pairwise distances. Any type with the same
/// `neighbors` signature can stand in as an approximate backend.
struct ExactNeighborSearch {
    /// For each point, the indices of its k nearest other points (ties broken by index).
    std::vector<std::vector<Index>> neighbors(const Matrix& sq_dist, Index k) const {
        const Index m = sq_dist.rows();
        std::vector<std::vector<Index>> out(static_cast<std::size_t>(m));
        std::vector<Index> order;
        for (Index a = 0; a < m; ++a) {
            order.clear();
            for (Index b = 0; b < m; ++b) {
                if (b != a) {
                    order.push_back(b);
                }
            }
            std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index x, Index y) {
                const double dx = sq_dist(a, x);
                const double dy = sq_dist(a, y);
                return dx != dy ? dx < dy : x < y;
            });
            out[static_cast<std::size_t>(a)].assign(order.begin(), order.begin() + k);
        }
        return out;
    }
};

namespace detail {

// Kernel weights that underflow would violate the positive-weight invariant.
inline double kernel_weight(double sq_dist, double tau, Index scale_dim) {
    const double w = std::exp(-tau * sq_dist / static_cast<double>(scale_dim));
    return std::max(w, std::numeric_limits<double>::min());
}

}  // namespace detail

/// Raw GKNN affinities from precomputed squared distances: edge (a, b) iff
/// either point is among the other's k nearest, weight exp(-tau d^2 / scale_dim).
template <class Search = ExactNeighborSearch>
AffinityGraph knn_affinities_from_distances(const Matrix& sq_dist, Index k, double tau, Index scale_dim,
                                            const Search& search = {}) {
    const Index m = sq_dist.rows();
    detail::require(k >= 1 && k < m, "knn_affinities: need 1 <= k < number of vectors");
    detail::require(std::isfinite(tau) && tau > 0.0, "knn_affinities: tau must be > 0");
    detail::require(scale_dim >= 1, "knn_affinities: scale_dim must be positive");
    const auto nbrs = search.neighbors(sq_dist, k);
    std::vector<char> linked(static_cast<std::size_t>(m * m), 0);
    std::vector<Edge> edges;
    for (Index a = 0; a < m; ++a) {
        for (Index b : nbrs[static_cast<std::size_t>(a)]) {
            const Index i = std::min(a, b);
            const Index j = std::max(a, b);
            auto& flag = linked[static_cast<std::size_t>(i * m + j)];
            if (!flag) {
                flag = 1;
                edges.push_back({i, j, detail::kernel_weight(sq_dist(i, j), tau, scale_dim)});
            }
        }
    }
    return AffinityGraph(m, std::move(edges));
}

template <class Search = ExactNeighborSearch>
AffinityGraph knn_affinities(const Matrix& M, Index k, double tau, Axis axis, Index scale_dim,
                             const Search& search = {}) {
    return knn_affinities_from_distances(pairwise_sq_distances(axis_vectors(M, axis)), k, tau, scale_dim, search);
}

/// Adds a minimum spanning set of bridging edges between components:
/// components are joined through their closest vertex pair (Kruskal over
/// component pairs), each bridge weighted by `bridge_weight(sq_dist)`.
/// Connected graphs are returned unchanged.
template <class WeightFn>
AffinityGraph connect_components(const AffinityGraph& g, const Matrix& sq_dist, WeightFn bridge_weight) {
    const auto labels = connected_components(g);
    const int comps = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    if (comps <= 1) {
        return g;
    }
    struct Bridge {
        double d;
        Index a;
        Index b;
    };
    const auto nc = static_cast<std::size_t>(comps);
    std::vector<Bridge> best(nc * nc, Bridge{std::numeric_limits<double>::infinity(), -1, -1});
    const Index m = g.dimension();
    for (Index a = 0; a < m; ++a) {
        for (Index b = a + 1; b < m; ++b) {
            auto ca = static_cast<std::size_t>(labels[a]);
            auto cb = static_cast<std::size_t>(labels[b]);
            if (ca == cb) {
                continue;
            }
            if (ca > cb) {
                std::swap(ca, cb);
            }
            auto& slot = best[ca * nc + cb];
            if (sq_dist(a, b) < slot.d) {
                slot = {sq_dist(a, b), a, b};
            }
        }
    }
    std::vector<Bridge> candidates;
    for (std::size_t ca = 0; ca < nc; ++ca) {
        for (std::size_t cb = ca + 1; cb < nc; ++cb) {
            candidates.push_back(best[ca * nc + cb]);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Bridge& x, const Bridge& y) { return x.d < y.d; });
    DisjointSets sets(comps);
    auto edges = g.edges();
    for (const auto& c : candidates) {
        if (sets.unite(labels[c.a], labels[c.b])) {
            edges.push_back({c.a, c.b, std::max(bridge_weight(c.d), std::numeric_limits<double>::min())});
        }
    }
    return AffinityGraph(m, std::move(edges));
}

/// Bridges carry the Gaussian kernel weight of the closest pair's distance.
inline AffinityGraph connect_components(const AffinityGraph& g, const Matrix& sq_dist, double tau, Index scale_dim) {
    return connect_components(g, sq_dist, [&](double d) { return detail::kernel_weight(d, tau, scale_dim); });
}

/// Divides every raw weight by sqrt(scale_dim) times the sum of raw weights,
/// each unordered edge counted once. The output weights are the square-rooted
/// affinities that multiply the fusion norms.
inline AffinityGraph normalize_affinities(const AffinityGraph& raw, Index scale_dim) {
    detail::require(!raw.empty(), "normalize_affinities: empty edge set");
    detail::require(scale_dim >= 1, "normalize_affinities: scale_dim must be positive");
    const double denom = std::sqrt(static_cast<double>(scale_dim)) * raw.total_weight();
    auto edges = raw.edges();
    for (auto& e : edges) {
        e.weight = std::max(e.weight / denom, std::numeric_limits<double>::min());
    }
    return AffinityGraph(raw.dimension(), std::move(edges));
}

struct GknnGraphs {
    AffinityGraph phi;
    AffinityGraph psi;
    bool phi_repaired = false;
    bool psi_repaired = false;
};

/// Normalized, connected GKNN affinities along one axis of M. Rows scale by the
/// column count and columns by the row count.
template <class Search = ExactNeighborSearch>
AffinityGraph gknn_graph(const Matrix& M, Index k, double tau, Axis axis, bool* repaired = nullptr,
                         const Search& search = {}) {
    const Index scale_dim = axis == Axis::rows ? M.cols() : M.rows();
    const Matrix sq = pairwise_sq_distances(axis_vectors(M, axis));
    AffinityGraph raw = knn_affinities_from_distances(sq, k, tau, scale_dim, search);
    const bool connected = is_connected(raw);
    if (repaired) {
        *repaired = !connected;
    }
    if (!connected) {
        raw = connect_components(raw, sq, tau, scale_dim);
    }
    return normalize_affinities(raw, scale_dim);
}

template <class Search = ExactNeighborSearch>
GknnGraphs gknn_graphs(const Matrix& M, const Hyperparameters& hp, const Search& search = {}) {
    GknnGraphs out;
    out.phi = gknn_graph(M, hp.k_row, hp.tau, Axis::rows, &out.phi_repaired, search);
    out.psi = gknn_graph(M, hp.k_col, hp.tau, Axis::columns, &out.psi_repaired, search);
    return out;
}

/// One row per edge (i, j): +w at column i and -w at column j, dense.
inline Eigen::MatrixXd weighted_incidence(const AffinityGraph& g) {
    detail::require(!g.empty(), "weighted_incidence: empty graph");
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Index>(g.num_edges()), g.dimension());
    Index r = 0;
    for (const auto& e : g.edges()) {
        D(r, e.i) = e.weight;
        D(r, e.j) = -e.weight;
        ++r;
    }
    return D;
}

/// Weighted Laplacian with adjacency weights equal to the squared stored weights.
inline Eigen::MatrixXd laplacian(const AffinityGraph& g) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.dimension(), g.dimension());
    for (const auto& e : g.edges()) {
        const double a = e.weight * e.weight;
        L(e.i, e.i) += a;
        L(e.j, e.j) += a;
        L(e.i, e.j) -= a;
        L(e.j, e.i) -= a;
    }
    return L;
}

struct SpectralSummary {
    Index rank = 0;
    double algebraic_connectivity = 0.0;
    std::size_t num_edges = 0;
};

// Dense eigendecomposition; meant for diagnostics and tests at desk scale.
inline SpectralSummary spectral_summary(const AffinityGraph& g) {
    SpectralSummary s;
    s.num_edges = g.num_edges();
    const int comps = num_components(g);
    s.rank = g.dimension() - comps;
    if (comps == 1 && g.dimension() >= 2) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(g), Eigen::EigenvaluesOnly);
        s.algebraic_connectivity = std::max(eig.eigenvalues()(1), 0.0);
    }
    return s;
}

/// "i j weight" per line, 0-based.
inline void write_edge_list(std::ostream& os, const AffinityGraph& g) {
    const auto old = os.precision(17);
    for (const auto& e : g.edges()) {
        os << e.i << ' ' << e.j << ' ' << e.weight << '\n';
    }
    os.precision(old);
}

}  // namespace bicoclust
