#include "bimsgc/family_io.hpp"

#include "bimsgc/graph.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bimsgc {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "optimizer sidecar assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'I', 'M', 'S', '1', 0, 0, 0};
constexpr std::uint32_t kSidecarVersion = 1;
constexpr int kFamilyFormat = 1;

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw LoadError("cannot write " + file.string());
    out << std::setprecision(17);
    return out;
}

std::ifstream open_in(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw LoadError("cannot open " + file.string());
    return in;
}

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const std::vector<double>& v) {
    Vector out(static_cast<Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i];
    return out;
}

ColMatrix read_dense_csv(const fs::path& file, Index rows, Index cols) {
    auto in = open_in(file);
    ColMatrix m(rows, cols);
    std::string line;
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw LoadError(file.string() + ": expected " + std::to_string(rows) + " rows");
        std::stringstream ss(line);
        std::string cell;
        for (Index j = 0; j < cols; ++j) {
            if (!std::getline(ss, cell, ','))
                throw LoadError(file.string() + ":" + std::to_string(i + 1) + ": expected " + std::to_string(cols) +
                                " columns");
            try {
                m(i, j) = std::stod(cell);
            } catch (const std::exception&) {
                throw LoadError(file.string() + ":" + std::to_string(i + 1) + ": bad number '" + cell + "'");
            }
        }
    }
    return m;
}

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const fs::path& file) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw LoadError(file.string() + ": truncated");
    return v;
}

}  // namespace

void write_weighted_edges(const SyntheticGraph& s, const fs::path& file) {
    ColMatrix a = reconstruct_adjacency(s);
    auto out = open_out(file);
    out << "src,dst,weight\n";
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = i + 1; j < a.cols(); ++j)
            if (a(i, j) > 0.0) out << i << "," << j << "," << a(i, j) << "\n";
}

void save_family(const ScaleFamily& f, const fs::path& dir) {
    const SyntheticGraph& s = f.large;
    Graph g;
    g.n_nodes = s.n_nodes;
    g.n_classes = s.n_classes;
    g.features = s.features;
    g.labels = s.labels;
    std::vector<std::pair<Index, Index>> edges;
    ColMatrix a = reconstruct_adjacency(s);
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = i + 1; j < a.cols(); ++j)
            if (a(i, j) > 0.0) edges.emplace_back(i, j);
    g.adjacency = adjacency_from_edges(s.n_nodes, edges);
    for (Index i = 0; i < s.n_nodes; ++i) g.splits.train.push_back(i);
    save_dataset(g, dir);

    json meta = {{"format", kFamilyFormat},
                 {"k_active", s.k_active},
                 {"shared_eigenvalues", to_vec(s.shared_eigenvalues)},
                 {"node_scores", to_vec(f.node_scores)},
                 {"mask_logits", to_vec(s.mask_logits)},
                 {"meso_rate", f.meso_rate},
                 {"max_rate", f.max_rate},
                 {"meso_nodes", f.meso.n_nodes},
                 {"config_digest", f.config_digest},
                 {"n_original", f.n_original},
                 {"original_class_sizes", f.original_class_sizes}};
    open_out(dir / "synth_meta.json") << meta.dump(2) << "\n";
    {
        auto out = open_out(dir / "eigenbasis.csv");
        for (Index i = 0; i < s.eigenbasis.rows(); ++i) {
            for (Index j = 0; j < s.eigenbasis.cols(); ++j) out << (j ? "," : "") << s.eigenbasis(i, j);
            out << "\n";
        }
    }
    write_weighted_edges(s, dir / "edges_weighted.csv");
}

ScaleFamily load_family(const fs::path& dir) {
    if (!fs::exists(dir / "synth_meta.json")) throw LoadError(dir.string() + ": no synth_meta.json (not a family directory)");
    Graph g = load_dataset(dir);
    json meta;
    try {
        auto in = open_in(dir / "synth_meta.json");
        meta = json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError((dir / "synth_meta.json").string() + ": " + e.what());
    }
    ScaleFamily f;
    SyntheticGraph& s = f.large;
    try {
        s.n_nodes = g.n_nodes;
        s.n_classes = g.n_classes;
        s.features = g.features;
        s.labels = g.labels;
        s.k_active = meta.at("k_active").get<Index>();
        s.shared_eigenvalues = from_vec(meta.at("shared_eigenvalues").get<std::vector<double>>());
        s.mask_logits = from_vec(meta.at("mask_logits").get<std::vector<double>>());
        f.node_scores = from_vec(meta.at("node_scores").get<std::vector<double>>());
        f.meso_rate = meta.at("meso_rate").get<double>();
        f.max_rate = meta.at("max_rate").get<double>();
        f.config_digest = meta.at("config_digest").get<std::string>();
        f.n_original = meta.at("n_original").get<Index>();
        f.original_class_sizes = meta.at("original_class_sizes").get<std::vector<Index>>();
        const Index meso_nodes = meta.at("meso_nodes").get<Index>();
        s.eigenbasis = read_dense_csv(dir / "eigenbasis.csv", s.n_nodes, s.k_active);
        if (s.mask_logits.size() != s.n_nodes || f.node_scores.size() != s.n_nodes ||
            s.shared_eigenvalues.size() != s.k_active || meso_nodes > s.n_nodes)
            throw LoadError((dir / "synth_meta.json").string() + ": field lengths disagree with the node count");
        std::vector<Index> prefix(static_cast<size_t>(meso_nodes));
        for (Index i = 0; i < meso_nodes; ++i) prefix[i] = i;
        f.meso = restrict_synthetic(s, prefix, meso_nodes);
    } catch (const json::exception& e) {
        throw LoadError((dir / "synth_meta.json").string() + ": " + e.what());
    }
    return f;
}

void save_optimizer_state(const AdamState& st, const fs::path& file) {
    auto out = open_out(file);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kSidecarVersion);
    put<std::uint32_t>(out, st.sgd ? 1u : 0u);
    put<double>(out, st.beta1);
    put<double>(out, st.beta2);
    put<double>(out, st.eps);
    put<std::int64_t>(out, st.step);
    put<std::uint64_t>(out, st.m.size());
    for (size_t t = 0; t < st.m.size(); ++t) {
        put<std::uint64_t>(out, static_cast<std::uint64_t>(st.m[t].size()));
        out.write(reinterpret_cast<const char*>(st.m[t].data()), st.m[t].size() * sizeof(double));
        out.write(reinterpret_cast<const char*>(st.v[t].data()), st.v[t].size() * sizeof(double));
    }
    if (!out) throw LoadError("write failed: " + file.string());
}

AdamState load_optimizer_state(const fs::path& file) {
    auto in = open_in(file);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw LoadError(file.string() + ": not an optimizer sidecar (bad magic)");
    const auto version = get<std::uint32_t>(in, file);
    if (version != kSidecarVersion) throw LoadError(file.string() + ": unsupported version " + std::to_string(version));
    AdamState st;
    st.sgd = get<std::uint32_t>(in, file) != 0;
    st.beta1 = get<double>(in, file);
    st.beta2 = get<double>(in, file);
    st.eps = get<double>(in, file);
    st.step = get<std::int64_t>(in, file);
    const auto tensors = get<std::uint64_t>(in, file);
    for (std::uint64_t t = 0; t < tensors; ++t) {
        const auto len = get<std::uint64_t>(in, file);
        Vector m(static_cast<Index>(len)), v(static_cast<Index>(len));
        if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(len * sizeof(double))) ||
            !in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(len * sizeof(double))))
            throw LoadError(file.string() + ": truncated");
        st.m.push_back(std::move(m));
        st.v.push_back(std::move(v));
    }
    return st;
}

}  // namespace bimsgc
