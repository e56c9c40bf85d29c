#pragma once

// Checkerboard generator, partition and ranking metrics, the finite-sample
// bound check, and runners for the two simulation studies.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "graph.hpp"
#include "palm.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "tuning.hpp"

namespace bicoclust {

struct CheckerboardSpec {
    Index n = 50;
    Index p = 50;
    Index p_extra = 0;
    double sigma = 1.0;
    int n_row_clusters = 5;
    int n_col_clusters = 5;
    double center_low = -10.0;
    double center_high = 10.0;
    std::uint64_t seed = 1;

    void validate() const {
        detail::require(n >= 2 && p >= 1 && p_extra >= 0 && p + p_extra >= 2, "CheckerboardSpec: bad dimensions");
        detail::require(n_row_clusters >= 1 && n_col_clusters >= 1, "CheckerboardSpec: cluster counts must be >= 1");
        detail::require(std::isfinite(sigma) && sigma > 0.0, "CheckerboardSpec: sigma must be > 0");
        detail::require(center_low <= center_high, "CheckerboardSpec: center_low > center_high");
    }
};

/// Labels after shuffling. Uninformative columns carry col label
/// n_col_clusters so every column has a label.
struct GroundTruth {
    std::vector<int> row_labels;
    std::vector<int> col_labels;
    std::vector<bool> informative;
};

struct Checkerboard {
    DataMatrix data;
    GroundTruth truth;
    Matrix signal;  // noiseless cell centers, shuffled and scaled like the data
};

/// Cell centers on a random row x column partition, p_extra zero columns,
/// Gaussian noise on every entry, rows and columns shuffled, then each column
/// divided by its sample standard deviation (denominator n - 1, no centering).
inline Checkerboard generate_checkerboard(const CheckerboardSpec& spec) {
    spec.validate();
    Rng rng = make_rng(spec.seed, 0x63686b72);
    const Index n = spec.n;
    const Index P = spec.p + spec.p_extra;
    Matrix centers(spec.n_row_clusters, spec.n_col_clusters);
    for (Index a = 0; a < centers.rows(); ++a) {
        for (Index b = 0; b < centers.cols(); ++b) {
            centers(a, b) = uniform(rng, spec.center_low, spec.center_high);
        }
    }
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) {
        r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.n_row_clusters)));
    }
    std::vector<int> cols(static_cast<std::size_t>(P), spec.n_col_clusters);
    for (Index l = 0; l < spec.p; ++l) {
        cols[static_cast<std::size_t>(l)] =
            static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.n_col_clusters)));
    }
    Matrix signal = Matrix::Zero(n, P);
    for (Index i = 0; i < n; ++i) {
        for (Index l = 0; l < spec.p; ++l) {
            signal(i, l) = centers(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(l)]);
        }
    }
    Matrix X(n, P);
    for (Index i = 0; i < n; ++i) {
        for (Index l = 0; l < P; ++l) {
            X(i, l) = signal(i, l) + spec.sigma * standard_normal(rng);
        }
    }

    std::vector<Index> row_perm(static_cast<std::size_t>(n));
    std::vector<Index> col_perm(static_cast<std::size_t>(P));
    std::iota(row_perm.begin(), row_perm.end(), Index{0});
    std::iota(col_perm.begin(), col_perm.end(), Index{0});
    shuffle(row_perm.begin(), row_perm.end(), rng);
    shuffle(col_perm.begin(), col_perm.end(), rng);

    Checkerboard out;
    Matrix Xs(n, P);
    out.signal.resize(n, P);
    out.truth.row_labels.resize(static_cast<std::size_t>(n));
    out.truth.col_labels.resize(static_cast<std::size_t>(P));
    out.truth.informative.resize(static_cast<std::size_t>(P));
    for (Index i = 0; i < n; ++i) {
        const Index src = row_perm[static_cast<std::size_t>(i)];
        out.truth.row_labels[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(src)];
        for (Index l = 0; l < P; ++l) {
            Xs(i, l) = X(src, col_perm[static_cast<std::size_t>(l)]);
            out.signal(i, l) = signal(src, col_perm[static_cast<std::size_t>(l)]);
        }
    }
    for (Index l = 0; l < P; ++l) {
        const Index src = col_perm[static_cast<std::size_t>(l)];
        out.truth.col_labels[static_cast<std::size_t>(l)] = cols[static_cast<std::size_t>(src)];
        out.truth.informative[static_cast<std::size_t>(l)] = src < spec.p;
    }
    for (Index l = 0; l < P; ++l) {
        double sd = std::sqrt((Xs.col(l).array() - Xs.col(l).mean()).square().sum() / static_cast<double>(n - 1));
        while (!(sd > 0.0)) {
            // Zero variance has probability zero; redraw the noise if it happens.
            for (Index i = 0; i < n; ++i) {
                Xs(i, l) = out.signal(i, l) + spec.sigma * standard_normal(rng);
            }
            sd = std::sqrt((Xs.col(l).array() - Xs.col(l).mean()).square().sum() / static_cast<double>(n - 1));
        }
        Xs.col(l) /= sd;
        out.signal.col(l) /= sd;
    }
    out.data = DataMatrix(std::move(Xs));
    return out;
}

namespace detail {

inline double choose2(double m) { return m * (m - 1.0) / 2.0; }

inline double ari_from_sums(double index, double sum_a, double sum_b, double total_pairs) {
    const double expected = sum_a * sum_b / total_pairs;
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0.0) {
        // Both partitions trivial (all one cluster or all singletons) in the same way.
        return index == expected ? 1.0 : 0.0;
    }
    return (index - expected) / denom;
}

inline std::map<std::pair<int, int>, double> contingency(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> t;
    for (std::size_t i = 0; i < a.size(); ++i) {
        t[{a[i], b[i]}] += 1.0;
    }
    return t;
}

inline std::map<int, double> counts(const std::vector<int>& a) {
    std::map<int, double> c;
    for (int v : a) {
        c[v] += 1.0;
    }
    return c;
}

}  // namespace detail

/// Contingency-table adjusted Rand index.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    detail::require(a.size() == b.size(), "adjusted_rand_index: length mismatch");
    detail::require(a.size() >= 2, "adjusted_rand_index: need at least two items");
    double index = 0.0;
    for (const auto& [key, c] : detail::contingency(a, b)) {
        index += detail::choose2(c);
    }
    double sa = 0.0;
    double sb = 0.0;
    for (const auto& [key, c] : detail::counts(a)) {
        sa += detail::choose2(c);
    }
    for (const auto& [key, c] : detail::counts(b)) {
        sb += detail::choose2(c);
    }
    return detail::ari_from_sums(index, sa, sb, detail::choose2(static_cast<double>(a.size())));
}

/// ARI between the entry partitions induced by (row label, column label)
/// pairs. The entry contingency table is the product of the row and column
/// tables, so no n x p labeling is formed.
inline double bicluster_ari(const std::vector<int>& row_a, const std::vector<int>& col_a,
                            const std::vector<int>& row_b, const std::vector<int>& col_b) {
    detail::require(row_a.size() == row_b.size() && col_a.size() == col_b.size(), "bicluster_ari: length mismatch");
    detail::require(row_a.size() * col_a.size() >= 2, "bicluster_ari: need at least two entries");
    const auto rt = detail::contingency(row_a, row_b);
    const auto ct = detail::contingency(col_a, col_b);
    double index = 0.0;
    for (const auto& [rk, rc] : rt) {
        for (const auto& [ck, cc] : ct) {
            index += detail::choose2(rc * cc);
        }
    }
    auto marginal = [](const std::vector<int>& r, const std::vector<int>& c) {
        double s = 0.0;
        const auto rc = detail::counts(r);
        const auto cc = detail::counts(c);
        for (const auto& [a, x] : rc) {
            for (const auto& [b, y] : cc) {
                s += detail::choose2(x * y);
            }
        }
        return s;
    };
    const double total = static_cast<double>(row_a.size()) * static_cast<double>(col_a.size());
    return detail::ari_from_sums(index, marginal(row_a, col_a), marginal(row_b, col_b), detail::choose2(total));
}

/// Mann-Whitney AUC of `weights` as a score for `informative`, ties counted
/// one half, computed from mid-ranks.
inline double weight_auc(const Vector& weights, const std::vector<bool>& informative) {
    detail::require(static_cast<std::size_t>(weights.size()) == informative.size(), "weight_auc: length mismatch");
    const auto P = informative.size();
    double pos = 0.0;
    for (bool b : informative) {
        pos += b ? 1.0 : 0.0;
    }
    const double neg = static_cast<double>(P) - pos;
    detail::require(pos > 0.0 && neg > 0.0, "weight_auc: need both informative and uninformative features");
    std::vector<std::size_t> order(P);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return weights(static_cast<Index>(a)) < weights(static_cast<Index>(b));
    });
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < P) {
        std::size_t j = i;
        while (j + 1 < P && weights(static_cast<Index>(order[j + 1])) == weights(static_cast<Index>(order[i]))) {
            ++j;
        }
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (informative[order[k]]) {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// Ground-truth labels restricted to informative columns, paired with the
/// estimate on the same columns, for the bicluster ARI reported by studies.
inline double informative_bicluster_ari(const GroundTruth& truth, const std::vector<int>& row_est,
                                        const std::vector<int>& col_est) {
    std::vector<int> ct;
    std::vector<int> ce;
    for (std::size_t l = 0; l < truth.informative.size(); ++l) {
        if (truth.informative[l]) {
            ct.push_back(truth.col_labels[l]);
            ce.push_back(col_est[l]);
        }
    }
    return bicluster_ari(truth.row_labels, ct, row_est, ce);
}

struct TheoremBoundSides {
    double threshold = 0.0;  // gamma must exceed this
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Gamma threshold of the finite-sample bound: sigma (1 + lambda) sqrt(np) times
/// max over the two graphs of sqrt(log(other_dim * nnz) / (dim * connectivity)),
/// with nnz counting both orientations of each edge.
inline double theorem_gamma_threshold(const AffinityGraph& phi, const AffinityGraph& psi, double sigma,
                                      double lambda) {
    const auto n = static_cast<double>(phi.dimension());
    const auto p = static_cast<double>(psi.dimension());
    const double eta_phi = spectral_summary(phi).algebraic_connectivity;
    const double eta_psi = spectral_summary(psi).algebraic_connectivity;
    detail::require(eta_phi > 0.0 && eta_psi > 0.0, "theorem_gamma_threshold: graphs must be connected");
    const double nnz_phi = 2.0 * static_cast<double>(phi.num_edges());
    const double nnz_psi = 2.0 * static_cast<double>(psi.num_edges());
    const double a = std::sqrt(std::log(p * nnz_phi) / (n * eta_phi));
    const double b = std::sqrt(std::log(n * nnz_psi) / (p * eta_psi));
    return sigma * (1.0 + lambda) * std::sqrt(n * p) * std::max(a, b);
}

/// Both sides of the prediction-error bound for an estimate (U_hat, w_hat)
/// of the planted U_true.
inline TheoremBoundSides theorem_bound_sides(const Matrix& U_true, const Matrix& U_hat, const SimplexWeights& w_hat,
                                             const AffinityGraph& phi, const AffinityGraph& psi, double sigma,
                                             double gamma, double lambda) {
    const auto n = static_cast<double>(U_true.rows());
    const auto p = static_cast<double>(U_true.cols());
    const double np = n * p;
    TheoremBoundSides s;
    s.threshold = theorem_gamma_threshold(phi, psi, sigma, lambda);
    s.lhs = weighted_sq_norm(U_true - U_hat, w_hat, lambda) / (2.0 * np);
    const double lognp = std::log(np);
    s.rhs = sigma * sigma * (1.0 + lambda) / 2.0 *
                (1.0 / n + 1.0 / p + std::sqrt(lognp / (n * p * p)) + std::sqrt(lognp / (n * n * p))) +
            2.0 * gamma / np * fusion_penalty(U_true, phi, psi);
    return s;
}

struct TheoremReplicate {
    int replicate = 0;
    std::uint64_t seed = 0;
    double gamma = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    bool converged = false;
};

struct TheoremCheckResult {
    double fraction_holding = 0.0;
    std::vector<TheoremReplicate> replicates;
};

struct TheoremCheckOptions {
    int n_row_clusters = 3;
    int n_col_clusters = 3;
    double gamma_margin = 1.01;  // gamma = margin x threshold
    // tau and k for the planted-truth graphs. The small bandwidth keeps the
    // bridges between planted clusters far from underflow, so the algebraic
    // connectivity (and with it the gamma threshold) stays finite.
    Hyperparameters graph = [] {
        Hyperparameters h;
        h.tau = 0.01;
        return h;
    }();
    PalmConfig palm;
    int threads = 1;
};

/// Per replicate: a planted checkerboard U (no scaling), GKNN graphs built from
/// U alone, Gaussian noise E, gamma just above the threshold, lambda = 0, one
/// fit of X = U + E, and a check of the bound.
inline TheoremCheckResult theorem1_check(Index n, Index p, double sigma, int replicates, std::uint64_t seed,
                                         const TheoremCheckOptions& opt = {}) {
    detail::require(replicates >= 1, "theorem1_check: replicates must be >= 1");
    detail::require(std::isfinite(sigma) && sigma >= 0.0, "theorem1_check: sigma must be >= 0");
    TheoremCheckResult out;
    out.replicates.resize(static_cast<std::size_t>(replicates));
    parallel_for(out.replicates.size(), opt.threads, [&](std::size_t r) {
        Rng rng = make_rng(seed, 0x74686d31 + r);
        Matrix centers(opt.n_row_clusters, opt.n_col_clusters);
        for (Index a = 0; a < centers.rows(); ++a) {
            for (Index b = 0; b < centers.cols(); ++b) {
                centers(a, b) = uniform(rng, -10.0, 10.0);
            }
        }
        Matrix U(n, p);
        std::vector<int> rl(static_cast<std::size_t>(n));
        std::vector<int> cl(static_cast<std::size_t>(p));
        for (auto& v : rl) {
            v = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(opt.n_row_clusters)));
        }
        for (auto& v : cl) {
            v = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(opt.n_col_clusters)));
        }
        for (Index i = 0; i < n; ++i) {
            for (Index l = 0; l < p; ++l) {
                U(i, l) = centers(rl[static_cast<std::size_t>(i)], cl[static_cast<std::size_t>(l)]);
            }
        }
        Matrix X = U;
        for (Index i = 0; i < n; ++i) {
            for (Index l = 0; l < p; ++l) {
                X(i, l) += sigma * standard_normal(rng);
            }
        }
        Hyperparameters hp = opt.graph;
        const GknnGraphs g = gknn_graphs(U, hp);
        hp.lambda = 0.0;
        hp.gamma = opt.gamma_margin * theorem_gamma_threshold(g.phi, g.psi, sigma, 0.0);
        const FitState st = fit(DataMatrix(X), g.phi, g.psi, hp, opt.palm);
        const TheoremBoundSides s = theorem_bound_sides(U, st.U, st.w, g.phi, g.psi, sigma, hp.gamma, 0.0);
        TheoremReplicate& rec = out.replicates[r];
        rec.replicate = static_cast<int>(r);
        rec.seed = seed;
        rec.gamma = hp.gamma;
        rec.lhs = s.lhs;
        rec.rhs = s.rhs;
        rec.holds = s.lhs <= s.rhs;
        rec.converged = st.converged;
    });
    int holding = 0;
    for (const auto& rec : out.replicates) {
        holding += rec.holds ? 1 : 0;
    }
    out.fraction_holding = static_cast<double>(holding) / static_cast<double>(replicates);
    return out;
}

/// One row of a tidy study table.
struct StudyRecord {
    std::string study;
    std::string setting;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::string method;
    std::string metric;
    double value = 0.0;
};

/// Wall-clock seconds per fit, kept apart from the metrics so that result
/// tables are reproducible byte for byte.
struct StudyTiming {
    std::string setting;
    int replicate = 0;
    std::string method;
    double seconds = 0.0;
};

struct StudyResult {
    std::vector<StudyRecord> records;
    std::vector<StudyTiming> timings;
};

struct StudyFitOptions {
    Hyperparameters hp;          // gamma, tau, k; lambda is fixed at hp.lambda
    PalmConfig palm;
    double r1_frac = 0.1;
    double r2_frac = 0.1;
    bool tune_gamma = false;     // select gamma by hold-out per replicate instead of hp.gamma
    std::vector<double> gamma_grid = default_gamma_grid();
    double holdout_fraction = 0.85;
    MissingFitConfig missing;
    int threads = 1;
};

struct StudyCase {
    std::string setting;
    CheckerboardSpec spec;
    int replicate = 0;
};

struct CaseMetrics {
    double ari = 0.0;
    double auc = 0.0;
    double gamma = 0.0;
    bool converged = false;
    double seconds = 0.0;
};

/// Fit one generated data set with fixed or adaptive affinities and score it.
inline CaseMetrics evaluate_case(const Checkerboard& cb, bool adaptive, const StudyFitOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    Hyperparameters hp = opt.hp;
    PalmConfig cfg = opt.palm;
    cfg.adaptive = adaptive;
    const GknnGraphs g = gknn_graphs(cb.data.values(), hp);
    if (opt.tune_gamma) {
        const HoldoutSplit split = make_holdout(cb.data.n(), cb.data.p(), opt.holdout_fraction, cb.data.n());
        TuningOptions topt;
        topt.missing = opt.missing;
        topt.threads = 1;
        hp.gamma = select_gamma(cb.data, g.phi, g.psi, opt.gamma_grid, split, hp, cfg, topt).gamma;
    }
    const FitState st = fit(cb.data, g.phi, g.psi, hp, cfg);
    const ClusterAssignment ca = assign_clusters(st.U, st.w, hp.lambda, opt.r1_frac, opt.r2_frac);
    CaseMetrics m;
    m.ari = informative_bicluster_ari(cb.truth, ca.row_labels, ca.col_labels);
    const bool mixed = std::find(cb.truth.informative.begin(), cb.truth.informative.end(), false) !=
                       cb.truth.informative.end();
    m.auc = mixed ? weight_auc(st.w.values(), cb.truth.informative) : std::numeric_limits<double>::quiet_NaN();
    m.gamma = hp.gamma;
    m.converged = st.converged;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

/// Runs every (case, method) pair, in parallel over cases, and collects tidy
/// records in case order.
inline StudyResult run_study(const std::string& study, const std::vector<StudyCase>& cases,
                             const StudyFitOptions& opt) {
    const std::vector<std::pair<std::string, bool>> methods{{"fixed", false}, {"adaptive", true}};
    std::vector<std::vector<CaseMetrics>> metrics(cases.size(), std::vector<CaseMetrics>(methods.size()));
    std::vector<std::vector<std::string>> errors(cases.size(), std::vector<std::string>(methods.size()));
    parallel_for(cases.size(), opt.threads, [&](std::size_t c) {
        const Checkerboard cb = generate_checkerboard(cases[c].spec);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            try {
                metrics[c][m] = evaluate_case(cb, methods[m].second, opt);
            } catch (const std::exception& e) {
                errors[c][m] = e.what();
            }
        }
    });
    StudyResult out;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        for (std::size_t m = 0; m < methods.size(); ++m) {
            auto push = [&](const char* metric, double v) {
                out.records.push_back(
                    {study, cases[c].setting, cases[c].replicate, cases[c].spec.seed, methods[m].first, metric, v});
            };
            if (!errors[c][m].empty()) {
                push("failed", 1.0);
                continue;
            }
            const CaseMetrics& x = metrics[c][m];
            push("bicluster_ari", x.ari);
            if (std::isfinite(x.auc)) {
                push("weight_auc", x.auc);
            }
            push("gamma", x.gamma);
            push("converged", x.converged ? 1.0 : 0.0);
            out.timings.push_back({cases[c].setting, cases[c].replicate, methods[m].first, x.seconds});
        }
    }
    return out;
}

/// Desk-scale grid for the uninformative-feature study: n = p = 50, 3 x 3
/// biclusters, sigma = 2, p_extra in {0, 100}.
inline std::vector<StudyCase> study1_cases(const std::vector<std::uint64_t>& seeds,
                                           const std::vector<Index>& p_extra = {0, 100}) {
    std::vector<StudyCase> cases;
    for (Index pe : p_extra) {
        for (std::size_t r = 0; r < seeds.size(); ++r) {
            CheckerboardSpec s;
            s.n = 50;
            s.p = 50;
            s.p_extra = pe;
            s.sigma = 2.0;
            s.n_row_clusters = 3;
            s.n_col_clusters = 3;
            s.seed = seeds[r];
            cases.push_back({"p_extra=" + std::to_string(pe), s, static_cast<int>(r)});
        }
    }
    return cases;
}

/// Desk-scale grid for the noise and size study: n = p in {30, 50},
/// sigma in {2, 4}, 3 x 3 biclusters, 100 extra uninformative columns.
inline std::vector<StudyCase> study2_cases(const std::vector<std::uint64_t>& seeds) {
    std::vector<StudyCase> cases;
    for (Index size : {Index{30}, Index{50}}) {
        for (double sigma : {2.0, 4.0}) {
            for (std::size_t r = 0; r < seeds.size(); ++r) {
                CheckerboardSpec s;
                s.n = size;
                s.p = size;
                s.p_extra = 100;
                s.sigma = sigma;
                s.n_row_clusters = 3;
                s.n_col_clusters = 3;
                s.seed = seeds[r];
                std::string sig = sigma == 2.0 ? "2" : "4";
                cases.push_back({"n=p=" + std::to_string(size) + ",sigma=" + sig, s, static_cast<int>(r)});
            }
        }
    }
    return cases;
}

/// Full-size grid for the uninformative-feature study: n = p = 200, 5 x 5
/// biclusters, sigma = 8, p_extra in {0, 100, ..., 900}.
inline std::vector<StudyCase> study1_paper_cases(const std::vector<std::uint64_t>& seeds) {
    std::vector<StudyCase> cases;
    for (Index pe = 0; pe <= 900; pe += 100) {
        for (std::size_t r = 0; r < seeds.size(); ++r) {
            CheckerboardSpec s;
            s.n = 200;
            s.p = 200;
            s.p_extra = pe;
            s.sigma = 8.0;
            s.seed = seeds[r];
            cases.push_back({"p_extra=" + std::to_string(pe), s, static_cast<int>(r)});
        }
    }
    return cases;
}

/// Full-size grid for the noise and size study: n = p = 50 + 25 i for
/// i = 0..4, sigma in {5, 7.5, 10, 12.5, 15}, 5 x 5 biclusters, 300 extra
/// uninformative columns.
inline std::vector<StudyCase> study2_paper_cases(const std::vector<std::uint64_t>& seeds) {
    std::vector<StudyCase> cases;
    for (int i = 0; i <= 4; ++i) {
        const Index size = 50 + 25 * i;
        for (int k = 0; k <= 4; ++k) {
            const double sigma = 5.0 + 2.5 * k;
            for (std::size_t r = 0; r < seeds.size(); ++r) {
                CheckerboardSpec s;
                s.n = size;
                s.p = size;
                s.p_extra = 300;
                s.sigma = sigma;
                s.seed = seeds[r];
                std::ostringstream os;
                os << "n=p=" << size << ",sigma=" << sigma;
                cases.push_back({os.str(), s, static_cast<int>(r)});
            }
        }
    }
    return cases;
}

struct SummaryRow {
    std::string study;
    std::string setting;
    std::string method;
    std::string metric;
    int count = 0;
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error sd / sqrt(count) (sample sd, denominator count - 1)
/// per (study, setting, method, metric), in first-appearance order.
inline std::vector<SummaryRow> summarize(const std::vector<StudyRecord>& records) {
    std::vector<SummaryRow> rows;
    std::vector<std::vector<double>> values;
    for (const auto& r : records) {
        std::size_t k = 0;
        while (k < rows.size() && !(rows[k].study == r.study && rows[k].setting == r.setting &&
                                    rows[k].method == r.method && rows[k].metric == r.metric)) {
            ++k;
        }
        if (k == rows.size()) {
            rows.push_back({r.study, r.setting, r.method, r.metric, 0, 0.0, 0.0});
            values.emplace_back();
        }
        values[k].push_back(r.value);
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& v = values[k];
        const double m = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) {
            mean += x;
        }
        mean /= m;
        double ss = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
        }
        rows[k].count = static_cast<int>(v.size());
        rows[k].mean = mean;
        rows[k].se = v.size() > 1 ? std::sqrt(ss / (m - 1.0)) / std::sqrt(m) : 0.0;
    }
    return rows;
}

}  // namespace bicoclust
