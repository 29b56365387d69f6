#include "bimsgc/spectral.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bimsgc;
using bimsgc::testing::complete_graph;
using bimsgc::testing::er_graph;

TEST(Laplacian, TwoNodePath) {
    Graph g = generate_sbm(2, 1, 1.0, 1.0, 1, 0);
    ColMatrix l = normalized_laplacian(g).to_dense();
    ColMatrix expect(2, 2);
    expect << 1, -1, -1, 1;
    EXPECT_LE((l - expect).cwiseAbs().maxCoeff(), 1e-15);
    auto de = dense_eig_oracle(l);
    EXPECT_NEAR(de.values(0), 0.0, 1e-12);
    EXPECT_NEAR(de.values(1), 2.0, 1e-12);
}

TEST(Laplacian, MatchesDenseConstruction) {
    Graph g = er_graph(50, 0.2, 3);
    ColMatrix a = g.adjacency.to_dense();
    Vector deg = a.rowwise().sum();
    Vector isq = deg.unaryExpr([](double d) { return d > 0 ? 1.0 / std::sqrt(d) : 0.0; });
    ColMatrix dense = isq.asDiagonal() * (ColMatrix(deg.asDiagonal()) - a) * isq.asDiagonal();
    for (Index i = 0; i < 50; ++i)
        if (deg(i) == 0) dense(i, i) = 1.0;
    EXPECT_LE((normalized_laplacian(g).to_dense() - dense).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Laplacian, IsolatedNodeGetsUnitDiagonal) {
    Graph g = generate_sbm(3, 3, 0.0, 0.0, 1, 0);
    ColMatrix l = normalized_laplacian(g).to_dense();
    EXPECT_TRUE(l.isApprox(ColMatrix::Identity(3, 3)));
}

TEST(Lanczos, TriangleHasDoubleEigenvalue) {
    auto l = normalized_laplacian(complete_graph(3));
    SpectralBundle sb = eigs_smallest(l, 3, 1e-10, 0);
    EXPECT_NEAR(sb.eigenvalues(0), 0.0, 1e-10);
    EXPECT_NEAR(sb.eigenvalues(1), 1.5, 1e-10);
    EXPECT_NEAR(sb.eigenvalues(2), 1.5, 1e-10);
}

TEST(Lanczos, MatchesOracleOnErGraph) {
    auto l = normalized_laplacian(er_graph(50, 0.2, 3));
    SpectralBundle sb = eigs_smallest(l, 8, 1e-9, 1);
    auto de = dense_eig_oracle(l.to_dense());
    for (Index i = 0; i < 8; ++i) EXPECT_NEAR(sb.eigenvalues(i), de.values(i), 1e-8);
    EXPECT_LE(sb.residual_norms.maxCoeff(), 1e-8);
    EXPECT_LE(eigen_residuals(l, sb.eigenvalues, sb.eigenvectors).maxCoeff(), 1e-8);
    ColMatrix gram = sb.eigenvectors.transpose() * sb.eigenvectors;
    EXPECT_LE((gram - ColMatrix::Identity(8, 8)).norm(), 10 * 1e-9);
}

TEST(Lanczos, NullVectorOfConnectedGraph) {
    Graph g = er_graph(40, 0.3, 9);
    auto l = normalized_laplacian(g);
    SpectralBundle sb = eigs_smallest(l, 1, 1e-10, 2);
    EXPECT_NEAR(sb.eigenvalues(0), 0.0, 1e-10);
    ColMatrix a = g.adjacency.to_dense();
    Vector expect = a.rowwise().sum().cwiseSqrt();
    expect.normalize();
    EXPECT_LE((sb.eigenvectors.col(0) - expect).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Lanczos, DeterministicForSeed) {
    auto l = normalized_laplacian(er_graph(60, 0.1, 4));
    auto a = eigs_smallest(l, 6, 1e-9, 5), b = eigs_smallest(l, 6, 1e-9, 5);
    EXPECT_TRUE(a.eigenvalues == b.eigenvalues);
    EXPECT_TRUE(a.eigenvectors == b.eigenvectors);
}

TEST(Lanczos, DisconnectedCliquesMultiplicity) {
    // three 4-cliques: eigenvalue 0 three times, then 4/3 nine times
    auto l = normalized_laplacian(generate_sbm(12, 3, 1.0, 0.0, 1, 0));
    auto sb = eigs_smallest(l, 5, 1e-10, 3);
    auto de = dense_eig_oracle(l.to_dense());
    for (Index i = 0; i < 5; ++i) EXPECT_NEAR(sb.eigenvalues(i), de.values(i), 1e-9);
    EXPECT_LE(max_principal_angle(sb.eigenvectors.leftCols(3), de.vectors.leftCols(3)), 1e-6);
}

TEST(Lanczos, SignConvention) {
    auto l = normalized_laplacian(er_graph(30, 0.3, 8));
    auto sb = eigs_smallest(l, 4, 1e-9, 0);
    for (Index j = 0; j < 4; ++j) {
        double mx = sb.eigenvectors.col(j).cwiseAbs().maxCoeff();
        for (Index i = 0; i < 30; ++i)
            if (std::abs(sb.eigenvectors(i, j)) > 1e-10 * mx) {
                EXPECT_GT(sb.eigenvectors(i, j), 0.0);
                break;
            }
    }
}

TEST(Lanczos, RejectsBadArguments) {
    auto l = normalized_laplacian(er_graph(10, 0.3, 1));
    EXPECT_THROW(eigs_smallest(l, 0, 1e-9, 0), ParameterError);
    EXPECT_THROW(eigs_smallest(l, 11, 1e-9, 0), ParameterError);
    EXPECT_THROW(eigs_smallest(l, 2, 0.0, 0), ParameterError);
}

TEST(Lanczos, SolverErrorCarriesResiduals) {
    auto l = normalized_laplacian(er_graph(120, 0.05, 2));
    LanczosOptions opts;
    opts.max_matvecs = 5;
    opts.max_basis = 3;
    try {
        eigs_smallest(l, 10, 1e-12, 0, opts);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.achieved_residuals.size(), 10);
    }
}

TEST(DenseOracle, Identity) {
    auto de = dense_eig_oracle(ColMatrix::Identity(4, 4));
    EXPECT_LE((de.values - Vector::Ones(4)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(DenseOracle, DiagonalGivesStandardBasis) {
    Vector d(3);
    d << 3, 1, 2;
    auto de = dense_eig_oracle(d.asDiagonal());
    EXPECT_DOUBLE_EQ(de.values(0), 1.0);
    EXPECT_DOUBLE_EQ(de.values(1), 2.0);
    EXPECT_DOUBLE_EQ(de.values(2), 3.0);
    EXPECT_DOUBLE_EQ(de.vectors(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(de.vectors(2, 1), 1.0);
    EXPECT_DOUBLE_EQ(de.vectors(0, 2), 1.0);
}

TEST(DenseOracle, Reconstruction) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    ColMatrix m(20, 20);
    for (Index i = 0; i < 20; ++i)
        for (Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = nd(rng);
    auto de = dense_eig_oracle(m);
    ColMatrix rec = de.vectors * de.values.asDiagonal() * de.vectors.transpose();
    EXPECT_LE((m - rec).norm(), 1e-10);
    for (Index i = 1; i < 20; ++i) EXPECT_LE(de.values(i - 1), de.values(i));
}

TEST(DenseOracle, GuardAbove512) { EXPECT_THROW(dense_eig_oracle(ColMatrix::Identity(513, 513)), ParameterError); }

TEST(Spectral, RandomGraphsAgreeWithOracle) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        Index n = 20 + static_cast<Index>(rng() % 100);
        double p = 0.05 + 0.3 * (rng() % 100) / 100.0;
        Index k = 1 + static_cast<Index>(rng() % 10);
        auto l = normalized_laplacian(er_graph(n, p, rng()));
        auto sb = eigs_smallest(l, k, 1e-9, trial);
        auto de = dense_eig_oracle(l.to_dense());
        for (Index i = 0; i < k; ++i) {
            EXPECT_NEAR(sb.eigenvalues(i), de.values(i), 1e-8) << "trial " << trial;
            EXPECT_GE(sb.eigenvalues(i), -1e-9);
            EXPECT_LE(sb.eigenvalues(i), 2 + 1e-9);
        }
    }
}
