#include "bimsgc/miest.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bimsgc;
using namespace bimsgc::testing;

namespace {

struct Pair {
    Matrix x, y;
};

Pair gaussian_pair(Index n, double rho, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Pair p{Matrix(n, 1), Matrix(n, 1)};
    for (Index i = 0; i < n; ++i) {
        double a = nd(rng), b = nd(rng);
        p.x(i, 0) = a;
        p.y(i, 0) = rho * a + std::sqrt(1.0 - rho * rho) * b;
    }
    return p;
}

CondenseConfig clique_config() {
    CondenseConfig cfg;
    cfg.scales = {1.0 / 6.0, 0.5};
    cfg.meso_candidates = {1.0 / 3.0, 2.0 / 3.0};
    cfg.beta_ib = 1.0;
    cfg.per_class_train = 6;
    return cfg;
}

}  // namespace

TEST(KsgMi, IndependentGaussians) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix x(4000, 1), y(4000, 1);
    for (Index i = 0; i < 4000; ++i) {
        x(i, 0) = nd(rng);
        y(i, 0) = nd(rng);
    }
    EXPECT_LE(std::abs(ksg_mi(x, y, 5).raw), 0.02);
}

TEST(KsgMi, CorrelatedGaussianClosedForm) {
    const double rho = 0.9;
    const double exact = -0.5 * std::log(1.0 - rho * rho);
    auto p = gaussian_pair(4000, rho, 17);
    MiEstimate est = ksg_mi(p.x, p.y, 5);
    EXPECT_NEAR(est.value, exact, 0.1 * exact);
    EXPECT_EQ(est.n_samples, 4000);
    EXPECT_EQ(est.k_neighbors, 5);
    EXPECT_EQ(est.estimator, "ksg");
}

TEST(KsgMi, IdenticalSamplesSentinel) {
    auto p = gaussian_pair(200, 0.5, 3);
    EXPECT_TRUE(ksg_mi(p.x, p.x, 3).infinite());
}

TEST(KsgMi, AllPointsIdenticalThrows) {
    Matrix x = Matrix::Zero(50, 1), y = Matrix::Ones(50, 2);
    EXPECT_THROW(ksg_mi(x, y, 3), NumericError);
}

TEST(KsgMi, NeedsMoreSamplesThanNeighbors) {
    Matrix x = Matrix::Random(5, 1), y = Matrix::Random(5, 1);
    EXPECT_THROW(ksg_mi(x, y, 5), ParameterError);
    EXPECT_THROW(ksg_mi(x, y, 0), ParameterError);
}

TEST(KsgMi, Symmetric) {
    auto p = gaussian_pair(1500, 0.6, 8);
    EXPECT_LE(std::abs(ksg_mi(p.x, p.y, 5).raw - ksg_mi(p.y, p.x, 5).raw), 1e-9);
}

TEST(KsgMi, MonotoneTransformInvariance) {
    auto p = gaussian_pair(4000, 0.8, 21);
    Matrix ex = p.x.array().exp().matrix();
    EXPECT_LE(std::abs(ksg_mi(ex, p.y, 5).raw - ksg_mi(p.x, p.y, 5).raw), 0.05);
}

TEST(KsgMi, ClampsNegativeForReporting) {
    std::mt19937_64 rng(40);
    std::normal_distribution<double> nd(0.0, 1.0);
    bool saw_negative = false;
    for (int trial = 0; trial < 20 && !saw_negative; ++trial) {
        Matrix x(100, 1), y(100, 1);
        for (Index i = 0; i < 100; ++i) {
            x(i, 0) = nd(rng);
            y(i, 0) = nd(rng);
        }
        MiEstimate e = ksg_mi(x, y, 3);
        EXPECT_GE(e.value, 0.0);
        if (e.raw < 0) {
            saw_negative = true;
            EXPECT_EQ(e.value, 0.0);
        }
    }
    EXPECT_TRUE(saw_negative);
}

TEST(PluginMi, Oracles) {
    std::vector<Index> a{0, 1, 2, 3, 0, 1, 2, 3};
    EXPECT_NEAR(plugin_mi(a, a), std::log(4.0), 1e-12);
    std::vector<Index> b{0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<Index> c{0, 1, 0, 1, 0, 1, 0, 1};
    EXPECT_NEAR(plugin_mi(b, c), 0.0, 1e-12);
    EXPECT_THROW(plugin_mi(a, b.empty() ? a : std::vector<Index>{0}), DimensionError);
}

TEST(JitteredOneHot, Shape) {
    Matrix m = jittered_one_hot({0, 2, 1}, 3, 1e-10, 1);
    ASSERT_EQ(m.rows(), 3);
    ASSERT_EQ(m.cols(), 3);
    EXPECT_NEAR(m(1, 2), 1.0, 1e-9);
    EXPECT_NEAR(m(1, 0), 0.0, 1e-9);
    EXPECT_TRUE(m == jittered_one_hot({0, 2, 1}, 3, 1e-10, 1));
}

TEST(GraphRepr, ZeroHopsIsProjectedFeatures) {
    Graph g = er_graph(40, 0.1, 2, 20);
    Matrix r = graph_repr(g, 0);
    EXPECT_EQ(r.rows(), 40);
    EXPECT_EQ(r.cols(), 16);
    EXPECT_LE((r - propagate_and_project(g.features, kReprSeed)).norm(), 1e-12);
    // projection is orthonormal, so Gram matrices of rows shrink but never grow
    EXPECT_LE(r.norm(), g.features.norm() + 1e-9);
}

TEST(GraphRepr, NarrowFeaturesKeepWidth) {
    Graph g = er_graph(10, 0.3, 2, 4);
    EXPECT_EQ(graph_repr(g, 1).cols(), 4);
}

TEST(GraphRepr, SymmetricComponentsGiveIdenticalRows) {
    Graph g = duplicated_clique_fixture();
    Matrix r = graph_repr(g, 2);
    for (Index v = 1; v < 12; ++v) {
        Index ref = v < 6 ? 0 : 6;
        EXPECT_LE((r.row(v) - r.row(ref)).norm(), 1e-12) << v;
    }
}

TEST(GraphRepr, CoraShapedDeterministic) {
    Graph g = cora_standin();
    Matrix a = graph_repr(g, 2), b = graph_repr(g, 2);
    EXPECT_EQ(a.rows(), 2708);
    EXPECT_EQ(a.cols(), 16);
    EXPECT_TRUE(a == b);
}

TEST(GraphRepr, NegativeHops) {
    EXPECT_THROW(graph_repr(complete_graph(3), -1), ParameterError);
}

TEST(MesoOracle, MonotoneWithoutCompression) {
    auto rows = brute_force_meso_oracle(duplicated_clique_fixture(), 6, 0.0);
    ASSERT_EQ(rows.size(), 3u);
    for (size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].objective, rows[i - 1].objective - 1e-12);
}

TEST(MesoOracle, RedundantGraphFavorsSmallerSize) {
    auto rows = brute_force_meso_oracle(duplicated_clique_fixture(), 6, 5.0);
    double best_small = rows.front().objective;
    for (size_t i = 0; i + 1 < rows.size(); ++i) best_small = std::max(best_small, rows[i].objective);
    EXPECT_LE(rows.back().objective, best_small);
}

TEST(MesoOracle, DuplicatedFeaturesSameInformativeness) {
    auto rows = brute_force_meso_oracle(duplicated_clique_fixture(), 4, 1.0);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].size, 2);
    EXPECT_EQ(rows[1].size, 4);
    EXPECT_NEAR(rows[0].informativeness, rows[1].informativeness, 1e-12);
    EXPECT_NEAR(rows[0].informativeness, std::log(2.0), 1e-12);
    // C(6,1)^2 and C(6,2)^2 class-balanced subsets
    EXPECT_EQ(rows[0].subsets, 36);
    EXPECT_EQ(rows[1].subsets, 225);
}

TEST(MesoOracle, Guards) {
    EXPECT_THROW(brute_force_meso_oracle(duplicated_clique_fixture(), 6, 1.0, 100), ParameterError);
    EXPECT_THROW(brute_force_meso_oracle(er_graph(13, 0.3, 1), 4, 1.0), ParameterError);
    EXPECT_THROW(brute_force_meso_oracle(duplicated_clique_fixture(), 7, 1.0), ParameterError);
}

TEST(SelectMeso, AgreesWithOracleOnCliqueFixture) {
    Graph g = duplicated_clique_fixture();
    CondenseConfig cfg = clique_config();
    CondenseContext ctx = make_context(g, cfg);
    MesoSelection sel = select_meso(ctx, cfg, cfg.meso_candidates, cfg.beta_ib, ProbeOptions{});
    ASSERT_EQ(sel.candidates.size(), 2u);
    EXPECT_EQ(sel.candidates[0].n_nodes, 2);
    EXPECT_EQ(sel.candidates[1].n_nodes, 4);

    auto rows = brute_force_meso_oracle(g, 6, cfg.beta_ib);
    double best = -1e300;
    Index best_size = 0;
    for (const auto& r : rows)
        if ((r.size == 2 || r.size == 4) && r.objective > best + 1e-12) {
            best = r.objective;
            best_size = r.size;
        }
    Index chosen = sel.fraction == sel.candidates[0].fraction ? 2 : 4;
    EXPECT_EQ(chosen, best_size);
}

TEST(SelectMeso, SingleCandidate) {
    auto p = small_problem(60, 6, 3, 20, 4);
    CondenseConfig cfg;
    cfg.scales = {0.2};
    CondenseContext ctx = make_context(p.g, cfg);
    ProbeOptions probe;
    probe.epochs = 5;
    MesoSelection sel = select_meso(ctx, cfg, {0.5}, 0.1, probe);
    EXPECT_DOUBLE_EQ(sel.fraction, 0.5);
    EXPECT_DOUBLE_EQ(sel.rate, 0.1);
    ASSERT_EQ(sel.candidates.size(), 1u);
}

TEST(SelectMeso, ThreeCandidatesDeterministic) {
    auto p = small_problem(60, 6, 3, 20, 4);
    CondenseConfig cfg;
    cfg.scales = {0.25};
    CondenseContext ctx = make_context(p.g, cfg);
    ProbeOptions probe;
    probe.epochs = 10;
    MesoSelection a = select_meso(ctx, cfg, {0.8, 0.2, 0.5}, 0.1, probe);
    MesoSelection b = select_meso(ctx, cfg, {0.2, 0.5, 0.8}, 0.1, probe);
    ASSERT_EQ(a.candidates.size(), 3u);
    EXPECT_DOUBLE_EQ(a.candidates[0].fraction, 0.2);
    EXPECT_TRUE(a.fraction == 0.2 || a.fraction == 0.5 || a.fraction == 0.8);
    EXPECT_EQ(a.fraction, b.fraction);
    for (size_t i = 0; i < 3; ++i) {
        EXPECT_FALSE(a.candidates[i].failed);
        EXPECT_EQ(a.candidates[i].objective, b.candidates[i].objective);
    }
}

TEST(SelectMeso, RejectsBadCandidates) {
    auto p = small_problem(30, 4, 3, 10, 4);
    CondenseConfig cfg;
    cfg.scales = {0.3};
    CondenseContext ctx = make_context(p.g, cfg);
    EXPECT_THROW(select_meso(ctx, cfg, {}, 0.1, ProbeOptions{}), ParameterError);
    EXPECT_THROW(select_meso(ctx, cfg, {1.5}, 0.1, ProbeOptions{}), ParameterError);
}
