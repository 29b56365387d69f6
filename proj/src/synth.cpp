#include "bimsgc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bimsgc {

Vector SyntheticGraph::mask() const {
    return mask_logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

std::vector<Index> SyntheticGraph::class_counts() const {
    std::vector<Index> counts(static_cast<size_t>(n_classes), 0);
    for (int y : labels) ++counts[y];
    return counts;
}

std::vector<Index> class_balanced_counts(double rate, Index n, int c, const std::vector<Index>& class_sizes) {
    if (!(rate > 0.0) || rate > 1.0) throw ParameterError("reduction rate must lie in (0, 1]");
    if (c < 1 || static_cast<int>(class_sizes.size()) != c)
        throw ParameterError("class_balanced_counts: class_sizes must have one entry per class");
    const Index total = static_cast<Index>(std::llround(rate * static_cast<double>(n)));
    if (total < c)
        throw ParameterError("infeasible rate " + std::to_string(rate) + ": round(rate*n)=" +
                             std::to_string(total) + " is below the class count " + std::to_string(c));
    std::vector<Index> counts(static_cast<size_t>(c), total / c);
    std::vector<int> order(static_cast<size_t>(c));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return class_sizes[a] > class_sizes[b]; });
    for (Index r = 0; r < total % c; ++r) ++counts[order[r]];
    return counts;
}

ColMatrix orthonormalize_columns(const ColMatrix& m) {
    ColMatrix q = m;
    for (Index j = 0; j < q.cols(); ++j) {
        for (int pass = 0; pass < 2; ++pass)
            for (Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
        double nrm = q.col(j).norm();
        if (nrm < 1e-12) throw NumericError("orthonormalize_columns: column " + std::to_string(j) + " is dependent");
        q.col(j) /= nrm;
    }
    return q;
}

SyntheticGraph init_synthetic(const Graph& g, const std::vector<Index>& counts, const SpectralBundle& sb,
                              std::uint64_t seed, const InitOptions& opts) {
    if (static_cast<int>(counts.size()) != g.n_classes)
        throw DimensionError("init_synthetic: counts must have one entry per class");
    const Index total = std::accumulate(counts.begin(), counts.end(), Index{0});
    if (total < 1) throw ParameterError("init_synthetic: empty synthetic graph");
    if (total > sb.k)
        throw DimensionError("init_synthetic: " + std::to_string(total) + " synthetic nodes need at least that many eigenpairs, bundle has " +
                             std::to_string(sb.k));
    if (g.splits.train.empty()) throw ParameterError("init_synthetic: graph has no training split");

    const Index d = g.feature_dim();
    Matrix means = Matrix::Zero(g.n_classes, d);
    std::vector<Index> per_class(static_cast<size_t>(g.n_classes), 0);
    for (Index v : g.splits.train) {
        means.row(g.labels[v]) += g.features.row(v);
        ++per_class[g.labels[v]];
    }
    for (int c = 0; c < g.n_classes; ++c)
        if (per_class[c] > 0) means.row(c) /= static_cast<double>(per_class[c]);

    Eigen::RowVectorXd stddev = Eigen::RowVectorXd::Zero(d);
    for (Index v : g.splits.train) {
        Eigen::RowVectorXd diff = g.features.row(v) - means.row(g.labels[v]);
        stddev += diff.cwiseAbs2();
    }
    stddev = (stddev / static_cast<double>(g.splits.train.size())).cwiseSqrt();

    SyntheticGraph s;
    s.n_nodes = total;
    s.n_classes = g.n_classes;
    s.k_active = total;
    s.features.resize(total, d);
    s.labels.reserve(static_cast<size_t>(total));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Index row = 0;
    for (int c = 0; c < g.n_classes; ++c) {
        for (Index i = 0; i < counts[c]; ++i, ++row) {
            s.labels.push_back(c);
            for (Index j = 0; j < d; ++j) {
                double z = nd(rng);
                s.features(row, j) = means(c, j) + (opts.noise_scale > 0 ? opts.noise_scale * stddev(j) * z : 0.0);
            }
        }
    }
    ColMatrix gauss(total, total);
    for (Index j = 0; j < total; ++j)
        for (Index i = 0; i < total; ++i) gauss(i, j) = nd(rng);
    s.eigenbasis = orthonormalize_columns(gauss);
    s.shared_eigenvalues = sb.eigenvalues.head(total);
    s.mask_logits = Vector::Constant(total, opts.mask_logit);
    return s;
}

void symmetrize_clip(ColMatrix& a) {
    // 32x32 tiles so the transposed reads stay in L1
    constexpr Index tile = 32;
    const Index n = a.cols();
    for (Index jb = 0; jb < n; jb += tile) {
        const Index je = std::min(jb + tile, n);
        for (Index ib = 0; ib <= jb; ib += tile) {
            const Index ie = std::min(ib + tile, n);
            for (Index j = jb; j < je; ++j) {
                const Index top = ib == jb ? j : ie;
                for (Index i = ib; i < top; ++i) {
                    const double v = std::max(0.5 * (a(i, j) + a(j, i)), 0.0);
                    a(i, j) = v;
                    a(j, i) = v;
                }
            }
        }
    }
    for (Index j = 0; j < n; ++j) a(j, j) = std::max(a(j, j), 0.0);
}

ColMatrix reconstruct_adjacency(const SyntheticGraph& s) {
    const Index k = s.k_active;
    if (s.eigenbasis.cols() != k || s.shared_eigenvalues.size() != k)
        throw DimensionError("reconstruct_adjacency: eigenbasis width differs from k_active");
    Vector weight = Vector::Ones(k) - s.shared_eigenvalues;
    ColMatrix a = (s.eigenbasis * weight.asDiagonal()) * s.eigenbasis.transpose();
    symmetrize_clip(a);
    return a;
}

ColMatrix propagation_matrix(const SyntheticGraph& s) {
    ColMatrix a = reconstruct_adjacency(s) + ColMatrix::Identity(s.n_nodes, s.n_nodes);
    const Vector isq = a.colwise().sum().transpose().cwiseSqrt().cwiseInverse();
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) a(i, j) *= isq(i) * isq(j);
    return a;
}

SyntheticGraph restrict_synthetic(const SyntheticGraph& s, const std::vector<Index>& nodes, Index k) {
    if (k > s.k_active) throw DimensionError("restrict_synthetic: k exceeds k_active");
    SyntheticGraph r;
    r.n_nodes = static_cast<Index>(nodes.size());
    r.n_classes = s.n_classes;
    r.k_active = k;
    r.features.resize(r.n_nodes, s.feature_dim());
    r.eigenbasis.resize(r.n_nodes, k);
    r.mask_logits.resize(r.n_nodes);
    for (Index i = 0; i < r.n_nodes; ++i) {
        Index v = nodes[i];
        if (v < 0 || v >= s.n_nodes) throw DimensionError("restrict_synthetic: node index out of range");
        r.features.row(i) = s.features.row(v);
        r.eigenbasis.row(i) = s.eigenbasis.row(v).head(k);
        r.mask_logits(i) = s.mask_logits(v);
        r.labels.push_back(s.labels[v]);
    }
    r.shared_eigenvalues = s.shared_eigenvalues.head(k);
    return r;
}

ExtractMode parse_extract_mode(const std::string& name) {
    if (name == "ranked") return ExtractMode::Ranked;
    if (name == "random") return ExtractMode::Random;
    throw ParameterError("unknown extraction mode '" + name + "' (expected ranked|random)");
}

std::string to_string(ExtractMode mode) { return mode == ExtractMode::Ranked ? "ranked" : "random"; }

std::vector<Index> extraction_nodes(const ScaleFamily& f, double rate, ExtractMode mode, std::uint64_t seed) {
    if (!(rate > 0.0) || rate > f.max_rate * (1.0 + 1e-9))
        throw ParameterError("extract: rate " + std::to_string(rate) + " outside (0, " + std::to_string(f.max_rate) + "]");
    const SyntheticGraph& big = f.large;
    auto counts = class_balanced_counts(rate, f.n_original, big.n_classes, f.original_class_sizes);

    std::vector<std::vector<Index>> by_class(static_cast<size_t>(big.n_classes));
    for (Index i = 0; i < big.n_nodes; ++i) by_class[big.labels[i]].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<Index> chosen;
    for (int c = 0; c < big.n_classes; ++c) {
        auto& members = by_class[c];
        if (counts[c] > static_cast<Index>(members.size()))
            throw ParameterError("extract: rate " + std::to_string(rate) + " needs " + std::to_string(counts[c]) +
                                 " nodes of class " + std::to_string(c) + ", family has " +
                                 std::to_string(members.size()));
        if (mode == ExtractMode::Ranked) {
            std::stable_sort(members.begin(), members.end(),
                             [&](Index a, Index b) { return f.node_scores(a) > f.node_scores(b); });
        } else {
            std::shuffle(members.begin(), members.end(), rng);
        }
        chosen.insert(chosen.end(), members.begin(), members.begin() + counts[c]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

SyntheticGraph extract_subgraph(const ScaleFamily& f, double rate, ExtractMode mode, std::uint64_t seed) {
    auto nodes = extraction_nodes(f, rate, mode, seed);
    return restrict_synthetic(f.large, nodes, static_cast<Index>(nodes.size()));
}

}  // namespace bimsgc
