#include "bimsgc/graph.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string_view>

namespace bimsgc {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<Index> Graph::class_sizes() const {
    std::vector<Index> sizes(static_cast<size_t>(n_classes), 0);
    for (int y : labels)
        if (y >= 0 && y < n_classes) ++sizes[y];
    return sizes;
}

void Graph::validate() const {
    if (n_nodes < 0 || n_classes < 1) throw ValidationError("graph needs n_classes >= 1");
    if (features.rows() != n_nodes)
        throw ValidationError("features have " + std::to_string(features.rows()) + " rows, expected " +
                              std::to_string(n_nodes));
    if (static_cast<Index>(labels.size()) != n_nodes)
        throw ValidationError("labels length differs from n_nodes");
    if (adjacency.rows != n_nodes || adjacency.cols != n_nodes)
        throw ValidationError("adjacency shape differs from n_nodes");
    for (Index i = 0; i < n_nodes; ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw ValidationError("node " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                  " outside [0," + std::to_string(n_classes) + ")");
        for (Index p = adjacency.row_ptr[i]; p < adjacency.row_ptr[i + 1]; ++p) {
            Index j = adjacency.col_idx[p];
            if (j == i) throw ValidationError("adjacency has a self loop at node " + std::to_string(i));
            if (adjacency.coeff(j, i) != adjacency.values[p])
                throw ValidationError("adjacency is asymmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
        }
    }
    std::vector<char> seen(static_cast<size_t>(n_nodes), 0);
    auto check = [&](const std::vector<Index>& idx, const char* name) {
        for (Index v : idx) {
            if (v < 0 || v >= n_nodes)
                throw ValidationError(std::string(name) + " split: index " + std::to_string(v) +
                                      " out of range");
            if (seen[v]) throw ValidationError(std::string(name) + " split: node " + std::to_string(v) +
                                               " appears in more than one split");
            seen[v] = 1;
        }
    };
    check(splits.train, "train");
    check(splits.val, "val");
    check(splits.test, "test");
    if (!splits.train.empty()) {
        std::vector<Index> per_class(static_cast<size_t>(n_classes), 0);
        for (Index v : splits.train) ++per_class[labels[v]];
        for (int c = 0; c < n_classes; ++c)
            if (per_class[c] == 0)
                throw ValidationError("class " + std::to_string(c) + " has no training node");
    }
}

CsrMatrix adjacency_from_edges(Index n_nodes, const std::vector<std::pair<Index, Index>>& edges,
                               LoadStats* stats) {
    std::vector<std::pair<Index, Index>> canon;
    canon.reserve(edges.size());
    Index self_loops = 0;
    for (auto [a, b] : edges) {
        if (a == b) {
            ++self_loops;
            continue;
        }
        canon.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(canon.begin(), canon.end());
    auto last = std::unique(canon.begin(), canon.end());
    Index dups = static_cast<Index>(canon.end() - last);
    canon.erase(last, canon.end());

    std::vector<std::tuple<Index, Index, double>> trip;
    trip.reserve(canon.size() * 2);
    for (auto [a, b] : canon) {
        trip.emplace_back(a, b, 1.0);
        trip.emplace_back(b, a, 1.0);
    }
    if (stats) {
        stats->self_loops_dropped += self_loops;
        stats->duplicates_dropped += dups;
    }
    return CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(trip));
}

namespace {

std::ifstream open_or_throw(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LoadError("cannot open " + p.string());
    return in;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

template <class T>
T parse_field(std::string_view field, const std::string& where) {
    field = trim(field);
    T v{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw ValidationError(where + ": cannot parse '" + std::string(field) + "'");
    return v;
}

template <class T, class F>
void for_each_field(std::string_view line, F&& f) {
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        f(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
}

std::string row_tag(const char* file, Index row) { return std::string(file) + " row " + std::to_string(row); }

json read_json(const fs::path& p) {
    auto in = open_or_throw(p);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(p.filename().string() + ": " + e.what());
    }
}

std::vector<Index> index_array(const json& j, const char* key) {
    std::vector<Index> out;
    if (!j.contains(key)) return out;
    for (const auto& v : j.at(key)) out.push_back(v.get<Index>());
    return out;
}

}  // namespace

Graph load_dataset(const fs::path& dir, LoadStats* stats) {
    if (!fs::is_directory(dir)) throw LoadError("dataset directory not found: " + dir.string());
    LoadStats local;
    json meta = read_json(dir / "meta.json");
    Graph g;
    Index dim = 0;
    bool listed_both_ways = false;
    try {
        g.n_nodes = meta.at("n_nodes").get<Index>();
        g.n_classes = meta.at("n_classes").get<int>();
        dim = meta.at("feature_dim").get<Index>();
        listed_both_ways = meta.value("symmetric_edges", false);
    } catch (const json::exception& e) {
        throw ValidationError("meta.json: " + std::string(e.what()));
    }
    if (g.n_nodes < 1 || g.n_classes < 1 || dim < 1)
        throw ValidationError("meta.json: n_nodes, n_classes and feature_dim must be positive");

    // edges
    std::vector<std::pair<Index, Index>> edges;
    {
        auto in = open_or_throw(dir / "edges.csv");
        std::string line;
        Index row = 0;
        while (std::getline(in, line)) {
            ++row;
            std::string_view sv = trim(line);
            if (sv.empty()) continue;
            size_t comma = sv.find(',');
            if (comma == std::string_view::npos)
                throw ValidationError(row_tag("edges.csv", row) + ": expected 'src,dst'");
            auto a = parse_field<Index>(sv.substr(0, comma), row_tag("edges.csv", row));
            auto b = parse_field<Index>(sv.substr(comma + 1), row_tag("edges.csv", row));
            if (a < 0 || a >= g.n_nodes || b < 0 || b >= g.n_nodes)
                throw ValidationError(row_tag("edges.csv", row) + ": node id out of range [0," +
                                      std::to_string(g.n_nodes) + ")");
            edges.emplace_back(a, b);
        }
        local.edge_rows = static_cast<Index>(edges.size());
    }
    if (listed_both_ways) {
        std::set<std::pair<Index, Index>> directed(edges.begin(), edges.end());
        for (size_t r = 0; r < edges.size(); ++r) {
            auto [a, b] = edges[r];
            if (a != b && !directed.count({b, a}))
                throw ValidationError(row_tag("edges.csv", static_cast<Index>(r) + 1) + ": edge (" +
                                      std::to_string(a) + "," + std::to_string(b) +
                                      ") has no reverse row but meta.json declares symmetric_edges");
        }
    }
    g.adjacency = adjacency_from_edges(g.n_nodes, edges, &local);

    // features
    g.features.resize(g.n_nodes, dim);
    if (fs::exists(dir / "features.bin")) {
        auto in = open_or_throw(dir / "features.bin");
        const auto expected = static_cast<std::uintmax_t>(g.n_nodes * dim) * sizeof(double);
        if (fs::file_size(dir / "features.bin") != expected)
            throw ValidationError("features.bin: expected " + std::to_string(expected) + " bytes");
        static_assert(sizeof(double) == 8);
        in.read(reinterpret_cast<char*>(g.features.data()), static_cast<std::streamsize>(expected));
    } else {
        auto in = open_or_throw(dir / "features.csv");
        std::string line;
        Index row = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            if (row >= g.n_nodes) throw ValidationError(row_tag("features.csv", row + 1) + ": too many rows");
            Index col = 0;
            const std::string where = row_tag("features.csv", row + 1);
            for_each_field<double>(trim(line), [&](std::string_view f) {
                if (col >= dim) throw ValidationError(where + ": more than " + std::to_string(dim) + " values");
                g.features(row, col++) = parse_field<double>(f, where);
            });
            if (col != dim) throw ValidationError(where + ": expected " + std::to_string(dim) + " values");
            ++row;
        }
        if (row != g.n_nodes)
            throw ValidationError("features.csv: " + std::to_string(row) + " rows, expected " +
                                  std::to_string(g.n_nodes));
    }

    // labels
    {
        auto in = open_or_throw(dir / "labels.csv");
        std::string line;
        Index row = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            const std::string where = row_tag("labels.csv", row + 1);
            int y = parse_field<int>(line, where);
            if (y < 0 || y >= g.n_classes)
                throw ValidationError(where + ": label " + std::to_string(y) + " outside [0," +
                                      std::to_string(g.n_classes) + ")");
            g.labels.push_back(y);
            ++row;
        }
        if (row != g.n_nodes)
            throw ValidationError("labels.csv: " + std::to_string(row) + " rows, expected " +
                                  std::to_string(g.n_nodes));
    }

    if (fs::exists(dir / "splits.json")) {
        json sj = read_json(dir / "splits.json");
        try {
            g.splits.train = index_array(sj, "train");
            g.splits.val = index_array(sj, "val");
            g.splits.test = index_array(sj, "test");
        } catch (const json::exception& e) {
            throw ValidationError("splits.json: " + std::string(e.what()));
        }
    }
    g.validate();

    if (local.self_loops_dropped + local.duplicates_dropped > 0)
        std::cerr << "warning: " << dir.string() << ": dropped " << local.self_loops_dropped
                  << " self loops and " << local.duplicates_dropped << " duplicate edges\n";
    if (stats) *stats = local;
    return g;
}

void save_dataset(const Graph& g, const fs::path& dir) {
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw LoadError("cannot write " + (dir / name).string());
        return out;
    };
    {
        json meta = {{"n_nodes", g.n_nodes}, {"n_classes", g.n_classes}, {"feature_dim", g.feature_dim()}};
        open("meta.json") << meta.dump(2) << "\n";
    }
    {
        auto out = open("edges.csv");
        for (Index i = 0; i < g.n_nodes; ++i)
            for (Index p = g.adjacency.row_ptr[i]; p < g.adjacency.row_ptr[i + 1]; ++p)
                if (g.adjacency.col_idx[p] > i) out << i << "," << g.adjacency.col_idx[p] << "\n";
    }
    {
        auto out = open("features.csv");
        out << std::setprecision(17);
        for (Index i = 0; i < g.n_nodes; ++i) {
            for (Index j = 0; j < g.feature_dim(); ++j) out << (j ? "," : "") << g.features(i, j);
            out << "\n";
        }
    }
    {
        auto out = open("labels.csv");
        for (int y : g.labels) out << y << "\n";
    }
    if (!g.splits.empty()) {
        json sj = {{"train", g.splits.train}, {"val", g.splits.val}, {"test", g.splits.test}};
        open("splits.json") << sj.dump() << "\n";
    }
}

Graph generate_sbm(Index n, int c, double p_in, double p_out, Index d, std::uint64_t seed) {
    if (c < 1 || n < c) throw ParameterError("generate_sbm: need n >= c >= 1");
    if (d < 1) throw ParameterError("generate_sbm: feature dimension must be positive");
    if (p_out < 0.0 || p_in > 1.0 || p_in < p_out)
        throw ParameterError("generate_sbm: need 0 <= p_out <= p_in <= 1");

    Graph g;
    g.n_nodes = n;
    g.n_classes = c;
    g.labels.resize(static_cast<size_t>(n));
    Index base = n / c, extra = n % c, pos = 0;
    for (int k = 0; k < c; ++k) {
        Index size = base + (k < extra ? 1 : 0);
        for (Index i = 0; i < size; ++i) g.labels[pos++] = k;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<Index, Index>> edges;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            double p = g.labels[i] == g.labels[j] ? p_in : p_out;
            if (unif(rng) < p) edges.emplace_back(i, j);
        }
    g.adjacency = adjacency_from_edges(n, edges);

    std::normal_distribution<double> noise(0.0, 1.0);
    g.features.resize(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) g.features(i, j) = noise(rng);
        g.features(i, g.labels[i] % d) += 2.0;
    }
    return g;
}

Graph split_planetoid(const Graph& g, Index per_class_train, Index n_val, Index n_test,
                      std::uint64_t seed) {
    if (per_class_train < 1) throw ParameterError("split_planetoid: per_class_train must be >= 1");
    if (n_val < 0 || n_test < 0) throw ParameterError("split_planetoid: negative split size");
    auto sizes = g.class_sizes();
    for (int c = 0; c < g.n_classes; ++c)
        if (sizes[c] < per_class_train)
            throw ParameterError("split_planetoid: class " + std::to_string(c) + " has only " +
                                 std::to_string(sizes[c]) + " nodes");
    if (per_class_train * g.n_classes + n_val + n_test > g.n_nodes)
        throw ParameterError("split_planetoid: requested " +
                             std::to_string(per_class_train * g.n_classes + n_val + n_test) +
                             " nodes but graph has " + std::to_string(g.n_nodes));

    std::vector<Index> perm(static_cast<size_t>(g.n_nodes));
    for (Index i = 0; i < g.n_nodes; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    Splits s;
    std::vector<Index> taken(static_cast<size_t>(g.n_classes), 0);
    std::vector<Index> rest;
    for (Index v : perm) {
        int y = g.labels[v];
        if (taken[y] < per_class_train) {
            ++taken[y];
            s.train.push_back(v);
        } else {
            rest.push_back(v);
        }
    }
    s.val.assign(rest.begin(), rest.begin() + n_val);
    s.test.assign(rest.begin() + n_val, rest.begin() + n_val + n_test);
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());

    Graph out = g;
    out.splits = std::move(s);
    return out;
}

}  // namespace bimsgc
