#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "bicoclust/simbench.hpp"
#include "bicoclust/tuning.hpp"
#include "test_support.hpp"

using namespace bicoclust;
namespace bt = bicoclust::testing;

namespace {

DataMatrix with_random_mask(const Matrix& X, double missing, std::uint64_t seed) {
    Rng rng = make_rng(seed, 7);
    BoolMatrix m = BoolMatrix::Constant(X.rows(), X.cols(), true);
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j) {
            m(i, j) = uniform01(rng) >= missing;
        }
    }
    for (Index j = 0; j < X.cols(); ++j) {
        m(0, j) = true;
    }
    return DataMatrix(X, m);
}

Hyperparameters small_hp(double gamma) {
    Hyperparameters hp;
    hp.gamma = gamma;
    hp.k_row = hp.k_col = 3;
    return hp;
}

// Components of the graph linking pairs within distance r, by BFS.
std::vector<int> bfs_components(const Matrix& dist, double r) {
    const Index m = dist.rows();
    std::vector<int> label(static_cast<std::size_t>(m), -1);
    int next = 0;
    for (Index s = 0; s < m; ++s) {
        if (label[static_cast<std::size_t>(s)] >= 0) {
            continue;
        }
        std::vector<Index> queue{s};
        label[static_cast<std::size_t>(s)] = next;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            for (Index t = 0; t < m; ++t) {
                if (label[static_cast<std::size_t>(t)] < 0 && t != queue[q] && dist(queue[q], t) <= r) {
                    label[static_cast<std::size_t>(t)] = next;
                    queue.push_back(t);
                }
            }
        }
        ++next;
    }
    return label;
}

}  // namespace

TEST(Holdout, FullFractionKeepsEverything) {
    const HoldoutSplit s = make_holdout(5, 4, 1.0, 3);
    EXPECT_EQ(s.num_held_out(), 0);
    EXPECT_TRUE(s.observed_mask.all());
}

TEST(Holdout, CountAndDeterminism) {
    const HoldoutSplit a = make_holdout(60, 50, 0.8, 11);
    const HoldoutSplit b = make_holdout(60, 50, 0.8, 11);
    const HoldoutSplit c = make_holdout(60, 50, 0.8, 12);
    EXPECT_EQ(a.observed_mask, b.observed_mask);
    EXPECT_NE(a.observed_mask, c.observed_mask);
    const double held = static_cast<double>(a.num_held_out()) / 3000.0;
    EXPECT_NEAR(held, 0.2, 0.03);
}

TEST(Holdout, EveryColumnKeepsAnEntry) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const HoldoutSplit s = make_holdout(2, 2, 0.05, seed);
        for (Index j = 0; j < 2; ++j) {
            EXPECT_TRUE(s.observed_mask.col(j).any());
        }
    }
    EXPECT_THROW(make_holdout(3, 3, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(make_holdout(3, 3, 1.5, 1), std::invalid_argument);
}

TEST(Holdout, ApplyIntersectsMasks) {
    Matrix v = Matrix::Ones(2, 2);
    BoolMatrix m = BoolMatrix::Constant(2, 2, true);
    m(0, 0) = false;
    HoldoutSplit s;
    s.observed_mask = BoolMatrix::Constant(2, 2, true);
    s.observed_mask(1, 1) = false;
    const DataMatrix d = apply_holdout(DataMatrix(v, m), s);
    EXPECT_FALSE(d.observed(0, 0));
    EXPECT_FALSE(d.observed(1, 1));
    EXPECT_TRUE(d.observed(0, 1));
    EXPECT_EQ(d.num_missing(), 2);
}

TEST(MeanFill, Example) {
    Matrix v(2, 2);
    v << 1, 2, 3, std::nan("");
    BoolMatrix m = BoolMatrix::Constant(2, 2, true);
    m(1, 1) = false;
    const Matrix f = mean_fill(DataMatrix(v, m));
    EXPECT_DOUBLE_EQ(f(1, 1), 2.0);
    EXPECT_DOUBLE_EQ(f(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(f(1, 0), 3.0);
    const Matrix c = complete_with(DataMatrix(v, m), Matrix::Constant(2, 2, 9.0));
    EXPECT_DOUBLE_EQ(c(1, 1), 9.0);
    EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
}

TEST(MaskedObjective, EqualsObjectiveWhenComplete) {
    Rng rng = make_rng(20);
    const Matrix X = bt::random_matrix(rng, 6, 5);
    const Matrix U = bt::random_matrix(rng, 6, 5);
    const auto phi = bt::random_connected_graph(rng, 6, 3);
    const auto psi = bt::random_connected_graph(rng, 5, 2);
    const auto w = project_simplex(bt::random_vector(rng, 5));
    const DataMatrix d(X, BoolMatrix::Constant(6, 5, true));
    EXPECT_NEAR(masked_objective(d, U, w, phi, psi, 0.4, 0.2), objective(X, U, w, phi, psi, 0.4, 0.2), 1e-12);
}

TEST(Majorizer, DominatesAndTouches) {
    Rng rng = make_rng(21);
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix X = bt::random_matrix(rng, 6, 5);
        const DataMatrix d = with_random_mask(X, 0.3, static_cast<std::uint64_t>(rep));
        const Matrix U = bt::random_matrix(rng, 6, 5);
        const Matrix Ut = bt::random_matrix(rng, 6, 5);
        const auto phi = bt::random_connected_graph(rng, 6, 3);
        const auto psi = bt::random_connected_graph(rng, 5, 2);
        const auto w = project_simplex(bt::random_vector(rng, 5));
        const double lambda = uniform(rng, 0.0, 0.5);
        const double F = masked_objective(d, U, w, phi, psi, 0.7, lambda);
        EXPECT_GE(majorizer(d, U, w, Ut, phi, psi, 0.7, lambda), F - 1e-12);
        EXPECT_NEAR(majorizer(d, U, w, U, phi, psi, 0.7, lambda), F, 1e-12);
    }
}

TEST(FitMissing, CompleteMaskMatchesFit) {
    Rng rng = make_rng(22);
    const Matrix X = bt::random_matrix(rng, 10, 8);
    const Hyperparameters hp = small_hp(2.0);
    const GknnGraphs g = gknn_graphs(X, hp);
    PalmConfig cfg;
    cfg.max_outer_iter = 50;
    const FitState direct = fit(DataMatrix(X), g.phi, g.psi, hp, cfg);
    const MissingFitResult r = fit_missing(DataMatrix(X, BoolMatrix::Constant(10, 8, true)), g.phi, g.psi, hp, cfg);
    EXPECT_EQ(r.state.U, direct.U);
    EXPECT_EQ(r.state.w.values(), direct.w.values());
    EXPECT_EQ(r.completed, X);
    EXPECT_EQ(r.mm_iterations, 0);
}

TEST(FitMissing, GammaZeroKeepsMeanFill) {
    Rng rng = make_rng(23);
    const Matrix X = bt::random_matrix(rng, 10, 8);
    const DataMatrix d = with_random_mask(X, 0.2, 5);
    const Hyperparameters hp = small_hp(0.0);
    const GknnGraphs g = gknn_graphs(mean_fill(d), hp);
    const MissingFitResult r = fit_missing(d, g.phi, g.psi, hp, PalmConfig{});
    EXPECT_TRUE(r.mm_converged);
    EXPECT_EQ(r.mm_iterations, 1);
    EXPECT_EQ(r.completed, mean_fill(d));
}

TEST(FitMissing, MonotoneAndMajorized) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        GTEST_LOG_(INFO) << "seed " << seed;
        CheckerboardSpec spec;
        spec.n = 20;
        spec.p = 16;
        spec.n_row_clusters = 2;
        spec.n_col_clusters = 2;
        spec.seed = seed;
        const Checkerboard cb = generate_checkerboard(spec);
        const DataMatrix d = with_random_mask(cb.data.values(), 0.15, seed);
        const Hyperparameters hp = small_hp(3.0);
        const GknnGraphs g = gknn_graphs(mean_fill(d), hp);
        PalmConfig cfg;
        cfg.max_outer_iter = 2000;
        MissingFitConfig mcfg;
        mcfg.mm_max_iter = 15;
        const MissingFitResult r = fit_missing(d, g.phi, g.psi, hp, cfg, mcfg);
        const auto& F = r.masked_objective_trace;
        const auto& G = r.majorizer_trace;
        ASSERT_EQ(F.size(), G.size() + 1);
        for (std::size_t t = 0; t < G.size(); ++t) {
            EXPECT_LE(F[t + 1], G[t] + 1e-10);
            EXPECT_LE(G[t], F[t] + Tolerances::monotone_slack * std::max(1.0, F[t]));
        }
        for (Index i = 0; i < d.n(); ++i) {
            for (Index j = 0; j < d.p(); ++j) {
                if (d.observed(i, j)) {
                    EXPECT_EQ(r.completed(i, j), cb.data.values()(i, j));
                } else {
                    EXPECT_EQ(r.completed(i, j), r.state.U(i, j));
                }
            }
        }
    }
}

TEST(Grids, Examples) {
    const auto g = log_grid(1.0, 100.0, 3);
    ASSERT_EQ(g.size(), 3U);
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    EXPECT_NEAR(g[1], 10.0, 1e-12);
    EXPECT_NEAR(g[2], 100.0, 1e-12);
    EXPECT_EQ(log_grid(2.0, 5.0, 1), std::vector<double>{2.0});
    EXPECT_EQ(default_gamma_grid().size(), 20U);
    const auto l = default_lambda_grid(50);
    ASSERT_EQ(l.size(), 10U);
    EXPECT_EQ(l[0], 0.0);
    EXPECT_NEAR(l[9], 1.0 / 50.0, 1e-15);
    EXPECT_TRUE(std::is_sorted(l.begin(), l.end()));
}

TEST(SelectGamma, MatchesDirectHoldoutError) {
    Rng rng = make_rng(24);
    const Matrix X = bt::random_matrix(rng, 10, 8);
    const Hyperparameters hp = small_hp(1.0);
    const GknnGraphs g = gknn_graphs(X, hp);
    const HoldoutSplit split = make_holdout(10, 8, 0.8, 4);
    PalmConfig cfg;
    cfg.max_outer_iter = 20;
    MissingFitConfig mcfg;
    mcfg.mm_max_iter = 5;
    TuningOptions opt;
    opt.missing = mcfg;
    const std::vector<double> grid{0.1, 1.0, 10.0};
    const GammaSelection sel = select_gamma(DataMatrix(X), g.phi, g.psi, grid, split, hp, cfg, opt);
    ASSERT_EQ(sel.path.size(), 3U);
    std::size_t best = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Hyperparameters h = hp;
        h.gamma = grid[k];
        const MissingFitResult r = fit_missing(apply_holdout(DataMatrix(X), split), g.phi, g.psi, h, cfg, mcfg);
        double sse = 0.0;
        for (Index i = 0; i < 10; ++i) {
            for (Index j = 0; j < 8; ++j) {
                if (!split.observed_mask(i, j)) {
                    sse += std::pow(r.state.U(i, j) - X(i, j), 2);
                }
            }
        }
        EXPECT_EQ(sel.path[k].holdout_sse, sse);
        if (sse < sel.path[best].holdout_sse) {
            best = k;
        }
    }
    EXPECT_EQ(sel.index, best);
    EXPECT_EQ(sel.gamma, grid[best]);
}

TEST(SelectGamma, SingletonAndTies) {
    Rng rng = make_rng(25);
    const Matrix X = bt::random_matrix(rng, 8, 6);
    const Hyperparameters hp = small_hp(1.0);
    const GknnGraphs g = gknn_graphs(X, hp);
    const HoldoutSplit split = make_holdout(8, 6, 0.8, 2);
    PalmConfig cfg;
    cfg.max_outer_iter = 10;
    const auto one = select_gamma(DataMatrix(X), g.phi, g.psi, {2.5}, split, hp, cfg);
    EXPECT_EQ(one.index, 0U);
    EXPECT_EQ(one.gamma, 2.5);
    const auto tie = select_gamma(DataMatrix(X), g.phi, g.psi, {2.5, 2.5}, split, hp, cfg);
    EXPECT_EQ(tie.index, 0U);
    EXPECT_EQ(tie.path[0].holdout_sse, tie.path[1].holdout_sse);
    EXPECT_THROW(select_gamma(DataMatrix(X), g.phi, g.psi, {}, split, hp, cfg), std::invalid_argument);
    EXPECT_THROW(select_gamma(DataMatrix(X), g.phi, g.psi, {-1.0}, split, hp, cfg), std::invalid_argument);
}

TEST(SelectGamma, ThreadCountDoesNotChangeResult) {
    Rng rng = make_rng(26);
    const Matrix X = bt::random_matrix(rng, 8, 6);
    const Hyperparameters hp = small_hp(1.0);
    const GknnGraphs g = gknn_graphs(X, hp);
    const HoldoutSplit split = make_holdout(8, 6, 0.8, 2);
    PalmConfig cfg;
    cfg.max_outer_iter = 10;
    TuningOptions one;
    TuningOptions four;
    four.threads = 4;
    const std::vector<double> grid{0.1, 1.0, 10.0, 100.0};
    const auto a = select_gamma(DataMatrix(X), g.phi, g.psi, grid, split, hp, cfg, one);
    const auto b = select_gamma(DataMatrix(X), g.phi, g.psi, grid, split, hp, cfg, four);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_EQ(a.path[k].holdout_sse, b.path[k].holdout_sse);
    }
}

TEST(PopulationSd, Example) {
    EXPECT_DOUBLE_EQ(detail::population_sd({1.0, 3.0}), 1.0);
    EXPECT_EQ(detail::population_sd({}), 0.0);
    EXPECT_EQ(detail::population_sd({4.0, 4.0, 4.0}), 0.0);
}

TEST(ThresholdComponents, MatchesBfs) {
    Rng rng = make_rng(27);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix pts = bt::random_matrix(rng, 12, 2);
        const Matrix dist = pairwise_sq_distances(pts).cwiseMax(0.0).cwiseSqrt();
        std::vector<double> all;
        for (Index a = 0; a < 12; ++a) {
            for (Index b = a + 1; b < 12; ++b) {
                all.push_back(dist(a, b));
            }
        }
        const double frac = uniform(rng, 0.0, 1.0);
        const auto labels = detail::threshold_components(dist, frac);
        EXPECT_EQ(labels, bfs_components(dist, frac * detail::population_sd(all)));
    }
}

TEST(AssignClusters, BlockExample) {
    Matrix U(4, 4);
    U << 1, 1, 5, 5,
         1, 1, 5, 5,
         3, 3, 0, 0,
         3, 3, 0, 0;
    const auto a = assign_clusters(U, SimplexWeights::uniform(4), 0.0, 0.5, 0.5);
    EXPECT_EQ(a.row_labels, (std::vector<int>{0, 0, 1, 1}));
    EXPECT_EQ(a.col_labels, (std::vector<int>{0, 0, 1, 1}));
}

TEST(AssignClusters, ZeroWeightColumnsShareReservedLabel) {
    Matrix U(4, 5);
    U << 1, 1, 5, 5, 9,
         1, 1, 5, 5, 2,
         3, 3, 0, 0, 7,
         3, 3, 0, 0, 1;
    Vector w(5);
    w << 0.25, 0.25, 0.25, 0.25, 0.0;
    const auto a = assign_clusters(U, SimplexWeights(w), 0.0, 0.5, 0.5);
    EXPECT_EQ(a.col_labels, (std::vector<int>{0, 0, 1, 1, 2}));
    EXPECT_EQ(a.row_labels, (std::vector<int>{0, 0, 1, 1}));
}

TEST(AssignClusters, RowPermutationInvariant) {
    Rng rng = make_rng(28);
    CheckerboardSpec spec;
    spec.n = 12;
    spec.p = 9;
    spec.n_row_clusters = 3;
    spec.n_col_clusters = 3;
    spec.sigma = 0.3;
    const Checkerboard cb = generate_checkerboard(spec);
    const auto w = SimplexWeights::uniform(9);
    const auto base = assign_clusters(cb.data.values(), w, 0.0, 0.2, 0.2);
    std::vector<Index> perm(12);
    std::iota(perm.begin(), perm.end(), Index{0});
    shuffle(perm.begin(), perm.end(), rng);
    Matrix P(12, 9);
    std::vector<int> permuted(12);
    for (Index i = 0; i < 12; ++i) {
        P.row(i) = cb.data.values().row(perm[static_cast<std::size_t>(i)]);
        permuted[static_cast<std::size_t>(i)] = base.row_labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    const auto moved = assign_clusters(P, w, 0.0, 0.2, 0.2);
    EXPECT_EQ(adjusted_rand_index(moved.row_labels, permuted), 1.0);
    EXPECT_EQ(moved.col_labels, base.col_labels);
}

TEST(Refit, Example) {
    Matrix X(2, 3);
    X << 1, 3, 10,
         5, 7, 20;
    Vector w(3);
    w << 0.5, 0.5, 0.0;
    const RefitResult r = refit_u_star(X, {0, 0}, {0, 0, 1}, SimplexWeights(w));
    EXPECT_EQ(r.df, 2);
    EXPECT_DOUBLE_EQ(r.U_star(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(r.U_star(1, 1), 4.0);
    EXPECT_DOUBLE_EQ(r.U_star(0, 2), 15.0);
    const RefitResult s = refit_u_star(X, {0, 1}, {0, 1, 2}, SimplexWeights::uniform(3));
    EXPECT_EQ(s.df, 6);
    EXPECT_EQ(s.U_star, X);
}

TEST(Refit, MatchesPerBlockMeans) {
    Rng rng = make_rng(29);
    for (int rep = 0; rep < 30; ++rep) {
        const Matrix X = bt::random_matrix(rng, 9, 7);
        const auto rows = bt::random_labels(rng, 9, 3);
        const auto cols = bt::random_labels(rng, 7, 3);
        // Relabel to dense ids so row and column cluster counts are exact.
        auto dense = [](std::vector<int> v) {
            std::map<int, int> ids;
            for (int& x : v) {
                x = ids.emplace(x, static_cast<int>(ids.size())).first->second;
            }
            return v;
        };
        const auto r = dense(rows);
        const auto c = dense(cols);
        const RefitResult out = refit_u_star(X, r, c, SimplexWeights::uniform(7));
        for (Index i = 0; i < 9; ++i) {
            for (Index l = 0; l < 7; ++l) {
                double sum = 0.0;
                int count = 0;
                for (Index a = 0; a < 9; ++a) {
                    for (Index b = 0; b < 7; ++b) {
                        if (r[static_cast<std::size_t>(a)] == r[static_cast<std::size_t>(i)] &&
                            c[static_cast<std::size_t>(b)] == c[static_cast<std::size_t>(l)]) {
                            sum += X(a, b);
                            ++count;
                        }
                    }
                }
                EXPECT_NEAR(out.U_star(i, l), sum / count, 1e-12);
            }
        }
        const int R = *std::max_element(r.begin(), r.end()) + 1;
        const int C = *std::max_element(c.begin(), c.end()) + 1;
        EXPECT_EQ(out.df, R * C);
    }
}

TEST(Ebic, Examples) {
    Matrix X(2, 2);
    X << 1, 1, 1, 1;
    EXPECT_NEAR(ebic(X, Matrix::Zero(2, 2), 1), 2.0 * std::log(4.0), 1e-12);
    EXPECT_NEAR(ebic(X, X, 1), 4.0 * std::log(ebic_residual_floor / 4.0) + 2.0 * std::log(4.0), 1e-9);
    const Matrix Z = Matrix::Zero(2, 2);
    EXPECT_LT(ebic(X, Z, 1), ebic(X, Z, 2));
    EXPECT_NEAR(ebic(X, Z, 3) - ebic(X, Z, 2), 2.0 * std::log(4.0), 1e-12);
    EXPECT_THROW(ebic(X, Z, 0), std::invalid_argument);
}

TEST(SelectLambda, ArgminAndSingleton) {
    CheckerboardSpec spec;
    spec.n = 14;
    spec.p = 12;
    spec.n_row_clusters = 2;
    spec.n_col_clusters = 2;
    spec.p_extra = 4;
    spec.seed = 3;
    const Checkerboard cb = generate_checkerboard(spec);
    const Hyperparameters hp = small_hp(5.0);
    const GknnGraphs g = gknn_graphs(cb.data.values(), hp);
    PalmConfig cfg;
    cfg.max_outer_iter = 100;
    const DataMatrix& d = cb.data;
    const std::vector<double> grid{0.0, 1e-3, 1e-2, 5e-2};
    const LambdaSelection sel = select_lambda(d, g.phi, g.psi, 5.0, grid, hp, cfg);
    ASSERT_EQ(sel.path.size(), grid.size());
    for (const auto& e : sel.path) {
        EXPECT_TRUE(e.error.empty());
        EXPECT_GE(e.ebic, sel.path[sel.index].ebic);
    }
    EXPECT_EQ(sel.model.lambda, grid[sel.index]);
    EXPECT_EQ(sel.model.ebic, sel.path[sel.index].ebic);
    const BiclusterModel rebuilt = build_model(cb.data.values(), sel.state, 5.0, grid[sel.index], 0.1, 0.1);
    EXPECT_EQ(rebuilt.df, sel.model.df);
    EXPECT_EQ(rebuilt.row_labels, sel.model.row_labels);

    const LambdaSelection one = select_lambda(d, g.phi, g.psi, 5.0, {1e-3}, hp, cfg);
    EXPECT_EQ(one.index, 0U);
    EXPECT_EQ(one.model.ebic, sel.path[1].ebic);
}

TEST(SelectLambda, RejectsMaskAndEmptyGrid) {
    Rng rng = make_rng(30);
    const Matrix X = bt::random_matrix(rng, 8, 6);
    const Hyperparameters hp = small_hp(1.0);
    const GknnGraphs g = gknn_graphs(X, hp);
    BoolMatrix m = BoolMatrix::Constant(8, 6, true);
    m(0, 0) = false;
    EXPECT_THROW(select_lambda(DataMatrix(X, m), g.phi, g.psi, 1.0, {0.0}, hp, PalmConfig{}), std::invalid_argument);
    EXPECT_THROW(select_lambda(DataMatrix(X), g.phi, g.psi, 1.0, {}, hp, PalmConfig{}), std::invalid_argument);
}
