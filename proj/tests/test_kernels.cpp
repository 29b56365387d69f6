#include "bimsgc/kernels.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bimsgc;

namespace {

CsrMatrix random_csr(Index n, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::tuple<Index, Index, double>> t;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (u(rng) < density) t.emplace_back(i, j, u(rng) - 0.5);
    return CsrMatrix::from_triplets(n, n, std::move(t));
}

Matrix random_dense(Index n, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = nd(rng);
    return m;
}

}  // namespace

TEST(Csr, DuplicatesAreSummed) {
    auto m = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 2.0}, {0, 1, 0.5}});
    EXPECT_EQ(m.nnz(), 2);
    EXPECT_DOUBLE_EQ(m.coeff(0, 1), 1.5);
    EXPECT_DOUBLE_EQ(m.coeff(1, 0), 2.0);
    EXPECT_DOUBLE_EQ(m.coeff(1, 1), 0.0);
}

TEST(Csr, OutOfRangeTripletThrows) {
    EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{0, 2, 1.0}}), DimensionError);
}

TEST(Csr, DenseRoundTrip) {
    auto m = random_csr(30, 0.2, 4);
    auto d = m.to_dense();
    for (Index i = 0; i < 30; ++i)
        for (Index j = 0; j < 30; ++j) EXPECT_EQ(d(i, j), m.coeff(i, j));
}

TEST(Kernels, SpmvMatchesSerial) {
    auto a = random_csr(200, 0.05, 1);
    std::vector<double> x(200), y1(200), y2(200);
    for (int i = 0; i < 200; ++i) x[i] = std::sin(i);
    kernels::spmv(a, x, y1);
    kernels::serial::spmv(a, x, y2);
    EXPECT_EQ(y1, y2);
    Vector ref = a.to_dense() * Eigen::Map<Vector>(x.data(), 200);
    for (int i = 0; i < 200; ++i) EXPECT_NEAR(y1[i], ref(i), 1e-12);
}

TEST(Kernels, SpmmMatchesSerialAndDense) {
    auto a = random_csr(150, 0.05, 2);
    Matrix x = random_dense(150, 7, 3);
    Matrix y1 = kernels::spmm(a, x);
    Matrix y2 = kernels::serial::spmm(a, x);
    EXPECT_TRUE(y1 == y2);
    Matrix ref = a.to_dense() * x;
    EXPECT_LE((y1 - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kernels, KthNeighborMatchesBruteForce) {
    Matrix z = random_dense(120, 3, 5);
    auto d1 = kernels::kth_neighbor_distance(z, 4);
    auto d2 = kernels::serial::kth_neighbor_distance(z, 4);
    EXPECT_EQ(d1, d2);
    for (Index i = 0; i < 120; ++i) {
        std::vector<double> dist;
        for (Index j = 0; j < 120; ++j)
            if (j != i) dist.push_back((z.row(i) - z.row(j)).cwiseAbs().maxCoeff());
        std::sort(dist.begin(), dist.end());
        EXPECT_DOUBLE_EQ(d1[i], dist[3]);
    }
}

TEST(Kernels, CountWithinIsStrict) {
    Matrix z(3, 1);
    z << 0.0, 1.0, 2.0;
    std::vector<double> r{1.0, 1.0, 1.5};
    auto c = kernels::count_within(z, r);
    EXPECT_EQ(c[0], 0);
    EXPECT_EQ(c[1], 0);
    EXPECT_EQ(c[2], 1);
    EXPECT_EQ(c, kernels::serial::count_within(z, r));
}

TEST(Kernels, JointKthMatchesConcatenation) {
    Matrix x = random_dense(80, 2, 6), y = random_dense(80, 3, 7);
    Matrix xy(80, 5);
    xy << x, y;
    auto a = kernels::joint_kth_neighbor_distance(x, y, 3);
    auto b = kernels::kth_neighbor_distance(xy, 3);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, kernels::serial::joint_kth_neighbor_distance(x, y, 3));
}

TEST(Kernels, InvalidKThrows) {
    Matrix z = random_dense(5, 2, 1);
    EXPECT_THROW(kernels::kth_neighbor_distance(z, 5), ParameterError);
    EXPECT_THROW(kernels::kth_neighbor_distance(z, 0), ParameterError);
}

TEST(Kernels, NormalizeWithSelfLoops) {
    auto a = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
    auto n = normalize_with_self_loops(a);
    EXPECT_NEAR(n.coeff(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(n.coeff(0, 1), 0.5, 1e-15);
}
