#include "fixtures.hpp"

#include <algorithm>
#include <random>

#include <unistd.h>

namespace bimsgc::testing {

Graph er_graph(Index n, double p, std::uint64_t seed, Index d) { return generate_sbm(n, 1, p, p, d, seed); }

Graph complete_graph(Index n) { return generate_sbm(n, 1, 1.0, 1.0, 1, 0); }

Graph duplicated_clique_fixture() {
    Graph g;
    g.n_nodes = 12;
    g.n_classes = 2;
    std::vector<std::pair<Index, Index>> edges;
    for (Index t = 0; t < 4; ++t) {
        Index b = 3 * t;
        edges.emplace_back(b, b + 1);
        edges.emplace_back(b, b + 2);
        edges.emplace_back(b + 1, b + 2);
    }
    g.adjacency = adjacency_from_edges(12, edges);
    g.features = Matrix::Zero(12, 3);
    for (Index v = 0; v < 12; ++v) {
        int y = v < 6 ? 0 : 1;
        g.labels.push_back(y);
        g.features(v, 0) = y == 0 ? 1.0 : -1.0;
        g.features(v, 1) = y == 0 ? 0.5 : 1.5;
        g.features(v, 2) = 0.25;
    }
    for (Index v = 0; v < 12; ++v) g.splits.train.push_back(v);
    return g;
}

Graph cora_standin(Index n, int c, Index d, std::uint64_t seed) {
    Graph g = generate_sbm(n, c, 0.0, 0.0, 1, seed);
    std::mt19937_64 rng(seed * 7919 + 3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    // 2 edges per node within class plus 4 to uniformly random nodes; tuned so a
    // full-graph GCN lands near 85% and an MLP near 57%, roughly Cora's gap
    std::vector<std::pair<Index, Index>> edges;
    std::vector<std::vector<Index>> members(static_cast<size_t>(c));
    for (Index v = 0; v < n; ++v) members[g.labels[v]].push_back(v);
    for (Index v = 0; v < n; ++v) {
        auto& own = members[g.labels[v]];
        std::uniform_int_distribution<size_t> pick_own(0, own.size() - 1);
        for (int e = 0; e < 2; ++e) edges.emplace_back(v, own[pick_own(rng)]);
        for (int e = 0; e < 4; ++e) edges.emplace_back(v, pick(rng));
    }
    g.adjacency = adjacency_from_edges(n, edges);

    // each class owns a vocabulary slice it uses with higher probability
    g.features = Matrix::Zero(n, d);
    Index slice = d / c;
    for (Index v = 0; v < n; ++v) {
        int y = g.labels[v];
        for (int w = 0; w < 18; ++w) {
            Index col;
            if (unif(rng) < 0.35) {
                std::uniform_int_distribution<Index> own(y * slice, (y + 1) * slice - 1);
                col = own(rng);
            } else {
                std::uniform_int_distribution<Index> any(0, d - 1);
                col = any(rng);
            }
            g.features(v, col) = 1.0;
        }
    }
    return split_planetoid(g, 20, std::min<Index>(500, n / 5), std::min<Index>(1000, n / 3), seed);
}

SyntheticGraph random_synthetic(Index n, Index d, Index k, int c, std::uint64_t seed, double mask_spread) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    SyntheticGraph s;
    s.n_nodes = n;
    s.n_classes = c;
    s.k_active = k;
    s.features.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) s.features(i, j) = nd(rng);
    ColMatrix u(n, k);
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < n; ++i) u(i, j) = nd(rng);
    s.eigenbasis = orthonormalize_columns(u);
    // leave U slightly off orthonormal so L_o has a nonzero gradient
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < n; ++i) s.eigenbasis(i, j) += 0.05 * nd(rng);
    s.shared_eigenvalues.resize(k);
    for (Index j = 0; j < k; ++j) s.shared_eigenvalues(j) = 1.6 * static_cast<double>(j) / std::max<Index>(k, 1);
    for (Index i = 0; i < n; ++i) s.labels.push_back(static_cast<int>(i * c / n));
    s.mask_logits.resize(n);
    for (Index i = 0; i < n; ++i) s.mask_logits(i) = mask_spread * nd(rng);
    return s;
}

SmallProblem small_problem(Index n, Index d, int c, Index k, std::uint64_t seed) {
    Graph g = generate_sbm(n, c, 0.6, 0.15, d, seed);
    g = split_planetoid(g, 1, 0, 0, seed);
    auto l = normalized_laplacian(g);
    DenseEigen de = dense_eig_oracle(l.to_dense());
    SpectralBundle sb;
    sb.k = k;
    sb.eigenvalues = de.values.head(k);
    sb.eigenvectors = de.vectors.leftCols(k);
    sb.residual_norms = eigen_residuals(l, sb.eigenvalues, sb.eigenvectors);
    sb.solver_tol = 1e-10;
    return {std::move(g), std::move(sb)};
}

TempDir::TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("bimsgc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

}  // namespace bimsgc::testing
