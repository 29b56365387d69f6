#include "bimsgc/miest.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>

namespace bimsgc {

MiEstimate ksg_mi(const Matrix& x, const Matrix& y, int k) {
    const Index n = x.rows();
    if (y.rows() != n) throw DimensionError("ksg_mi: x and y need the same number of samples");
    if (k < 1 || n <= k)
        throw ParameterError("ksg_mi: need n > k >= 1 (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
    MiEstimate est;
    est.k_neighbors = k;
    est.n_samples = n;
    est.estimator = "ksg";
    if (x.cols() == y.cols() && x == y) {
        est.value = est.raw = std::numeric_limits<double>::infinity();
        return est;
    }
    std::vector<double> eps = kernels::joint_kth_neighbor_distance(x, y, k);
    if (*std::max_element(eps.begin(), eps.end()) == 0.0)
        throw NumericError("ksg_mi: all joint samples are identical");
    std::vector<Index> nx = kernels::count_within(x, eps);
    std::vector<Index> ny = kernels::count_within(y, eps);
    double acc = 0.0;
    for (Index i = 0; i < n; ++i)
        acc += boost::math::digamma(static_cast<double>(nx[i] + 1)) + boost::math::digamma(static_cast<double>(ny[i] + 1));
    est.raw = boost::math::digamma(static_cast<double>(k)) + boost::math::digamma(static_cast<double>(n)) -
              acc / static_cast<double>(n);
    est.value = std::max(0.0, est.raw);
    return est;
}

Matrix jittered_one_hot(const std::vector<int>& labels, int n_classes, double jitter, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, jitter);
    Matrix m(static_cast<Index>(labels.size()), n_classes);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index c = 0; c < n_classes; ++c) m(i, c) = (labels[i] == c ? 1.0 : 0.0) + u(rng);
    return m;
}

double plugin_mi(const std::vector<Index>& a, const std::vector<Index>& b) {
    if (a.size() != b.size()) throw DimensionError("plugin_mi: sequences differ in length");
    if (a.empty()) return 0.0;
    std::map<std::pair<Index, Index>, double> joint;
    std::map<Index, double> pa, pb;
    const double n = static_cast<double>(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
    }
    double mi = 0.0;
    for (const auto& [key, c] : joint) mi += c / n * std::log(c * n / (pa[key.first] * pb[key.second]));
    return std::max(0.0, mi);
}

Matrix propagate_and_project(const Matrix& propagated, std::uint64_t seed) {
    const Index d = propagated.cols();
    const Index p = std::min<Index>(16, d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    ColMatrix gauss(d, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < d; ++i) gauss(i, j) = nd(rng);
    ColMatrix proj = orthonormalize_columns(gauss);
    return propagated * proj;
}

Matrix graph_repr(const Graph& g, int hops, std::uint64_t seed) {
    if (hops < 0) throw ParameterError("graph_repr: hops must be >= 0");
    CsrMatrix ahat = normalize_with_self_loops(g.adjacency);
    Matrix h = g.features;
    for (int i = 0; i < hops; ++i) h = kernels::spmm(ahat, h);
    return propagate_and_project(h, seed);
}

Matrix graph_repr(const SyntheticGraph& s, int hops, std::uint64_t seed) {
    if (hops < 0) throw ParameterError("graph_repr: hops must be >= 0");
    ColMatrix p = propagation_matrix(s);
    Matrix h = s.features;
    for (int i = 0; i < hops; ++i) h = p * h;
    return propagate_and_project(h, seed);
}

namespace {

// First counts[c] members of each class, in index order.
std::vector<Index> class_prefix(const std::vector<int>& labels, const std::vector<Index>& counts) {
    std::vector<Index> taken(counts.size(), 0), nodes;
    for (Index i = 0; i < static_cast<Index>(labels.size()); ++i)
        if (taken[labels[i]] < counts[labels[i]]) {
            ++taken[labels[i]];
            nodes.push_back(i);
        }
    return nodes;
}

Matrix rows_of(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

}  // namespace

MesoSelection select_meso(const CondenseContext& ctx, const CondenseConfig& cfg,
                          const std::vector<double>& candidates, double beta_ib, const ProbeOptions& probe) {
    if (candidates.empty()) throw ParameterError("select_meso: no candidates");
    const Graph& g = *ctx.g;
    const double max_rate = cfg.max_rate();
    std::vector<double> order = candidates;
    std::sort(order.begin(), order.end());
    for (double f : order)
        if (!(f > 0.0 && f <= 1.0)) throw ParameterError("select_meso: candidate fractions must lie in (0, 1]");

    MesoSelection sel;
    PhaseResult probe_graph = train_meso(ctx, cfg, max_rate, probe.epochs, cfg.seed + 0x51);
    Matrix rep_full = graph_repr(probe_graph.graph, probe.hops);
    const auto sizes = g.class_sizes();

    bool any = false;
    double best = -std::numeric_limits<double>::infinity();
    for (double f : order) {
        CandidateScore cs;
        cs.fraction = f;
        cs.rate = f * max_rate;
        auto counts = class_balanced_counts(cs.rate, g.n_nodes, g.n_classes, sizes);
        auto nodes = class_prefix(probe_graph.graph.labels, counts);
        cs.n_nodes = static_cast<Index>(nodes.size());
        try {
            SyntheticGraph sub = restrict_synthetic(probe_graph.graph, nodes, cs.n_nodes);
            refine(sub, ctx.targets, cfg, probe.epochs);
            const int k = std::min<int>(probe.k_neighbors, static_cast<int>(cs.n_nodes) - 1);
            if (k < 1) throw NumericError("too few nodes for the kNN estimator");
            Matrix rep_sub = graph_repr(sub, probe.hops);
            Matrix y = jittered_one_hot(sub.labels, g.n_classes, 1e-10, cfg.seed + 0x71);
            cs.informativeness = ksg_mi(rep_sub, y, k).raw;
            cs.compression = ksg_mi(rows_of(rep_full, nodes), rep_sub, k).raw;
            cs.objective = cs.informativeness - (beta_ib > 0 ? beta_ib * cs.compression : 0.0);
            if (std::isnan(cs.objective)) throw NumericError("objective is not a number");
        } catch (const NumericError& e) {
            cs.failed = true;
            cs.note = e.what();
        }
        if (!cs.failed && (!any || cs.objective > best)) {
            any = true;
            best = cs.objective;
            sel.fraction = f;
            sel.rate = cs.rate;
        }
        sel.candidates.push_back(cs);
    }
    if (!any) {
        if (order.size() == 1) {
            sel.fraction = order[0];
            sel.rate = order[0] * max_rate;
            return sel;
        }
        throw NumericError("select_meso: every candidate failed (" + sel.candidates.front().note + ")");
    }
    return sel;
}

namespace {

// Equal-width bins per column over the reference range; values outside clamp.
struct Quantizer {
    Eigen::RowVectorXd lo, width;
    int bins = 8;

    explicit Quantizer(const Matrix& ref, int b = 8) : bins(b) {
        lo = ref.colwise().minCoeff();
        Eigen::RowVectorXd hi = ref.colwise().maxCoeff();
        width = (hi - lo) / static_cast<double>(bins);
    }

    std::vector<int> code(const Eigen::RowVectorXd& row) const {
        std::vector<int> out(static_cast<size_t>(row.size()));
        for (Index j = 0; j < row.size(); ++j) {
            int b = 0;
            if (width(j) > 0) b = static_cast<int>(std::floor((row(j) - lo(j)) / width(j)));
            out[j] = std::clamp(b, 0, bins - 1);
        }
        return out;
    }
};

std::vector<Index> symbols(const Matrix& m, const Quantizer& q, std::map<std::vector<int>, Index>& table) {
    std::vector<Index> out;
    for (Index i = 0; i < m.rows(); ++i) {
        auto key = q.code(m.row(i));
        auto it = table.emplace(key, static_cast<Index>(table.size())).first;
        out.push_back(it->second);
    }
    return out;
}

Index binomial(Index n, Index k) {
    if (k < 0 || k > n) return 0;
    Index r = 1;
    for (Index i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

std::vector<OracleRow> brute_force_meso_oracle(const Graph& g, Index max_subgraph, double beta_ib, Index budget) {
    if (g.n_nodes > 12) throw ParameterError("brute_force_meso_oracle: graph has more than 12 nodes");
    if (max_subgraph > 6) throw ParameterError("brute_force_meso_oracle: max_subgraph above 6");
    if (max_subgraph < g.n_classes) throw ParameterError("brute_force_meso_oracle: max_subgraph below class count");

    CsrMatrix ahat = normalize_with_self_loops(g.adjacency);
    Matrix full = kernels::spmm(ahat, g.features);
    Quantizer quant(full);
    ColMatrix adj = g.adjacency.to_dense();
    std::vector<std::vector<Index>> members(static_cast<size_t>(g.n_classes));
    for (Index v = 0; v < g.n_nodes; ++v) members[g.labels[v]].push_back(v);

    std::vector<OracleRow> rows;
    Index spent = 0;
    for (Index size = g.n_classes; size <= max_subgraph; size += g.n_classes) {
        std::vector<Index> counts(static_cast<size_t>(g.n_classes), size / g.n_classes);
        Index combos = 1;
        for (int c = 0; c < g.n_classes; ++c) combos *= binomial(static_cast<Index>(members[c].size()), counts[c]);
        spent += combos;
        if (spent > budget)
            throw ParameterError("brute_force_meso_oracle: " + std::to_string(spent) + " subsets exceed the budget of " +
                                 std::to_string(budget));

        OracleRow row;
        row.size = size;
        row.objective = -std::numeric_limits<double>::infinity();
        std::vector<Index> chosen;
        std::function<void(int, size_t)> pick = [&](int c, size_t from) {
            Index have = 0;
            for (Index v : chosen) have += g.labels[v] == c ? 1 : 0;
            if (c == g.n_classes) {
                const Index m = static_cast<Index>(chosen.size());
                ColMatrix a(m, m);
                for (Index i = 0; i < m; ++i)
                    for (Index j = 0; j < m; ++j) a(i, j) = adj(chosen[i], chosen[j]) + (i == j ? 1.0 : 0.0);
                Vector isq = a.rowwise().sum().cwiseSqrt().cwiseInverse();
                ColMatrix norm = isq.asDiagonal() * a * isq.asDiagonal();
                Matrix xs(m, g.feature_dim()), fs(m, g.feature_dim());
                std::vector<Index> ys;
                for (Index i = 0; i < m; ++i) {
                    xs.row(i) = g.features.row(chosen[i]);
                    fs.row(i) = full.row(chosen[i]);
                    ys.push_back(g.labels[chosen[i]]);
                }
                Matrix sub = norm * xs;
                std::map<std::vector<int>, Index> table;
                auto s_sub = symbols(sub, quant, table);
                auto s_full = symbols(fs, quant, table);
                double info = plugin_mi(s_sub, ys);
                double comp = plugin_mi(s_full, s_sub);
                double obj = info - beta_ib * comp;
                if (obj > row.objective) {
                    row.objective = obj;
                    row.informativeness = info;
                    row.compression = comp;
                }
                ++row.subsets;
                return;
            }
            if (have == counts[c]) {
                pick(c + 1, 0);
                return;
            }
            for (size_t i = from; i < members[c].size(); ++i) {
                chosen.push_back(members[c][i]);
                pick(c, i + 1);
                chosen.pop_back();
            }
        };
        pick(0, 0);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace bimsgc
