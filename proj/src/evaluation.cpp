#include "bimsgc/evaluation.hpp"

#include "bimsgc/family_io.hpp"
#include "bimsgc/miest.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace bimsgc {

namespace fs = std::filesystem;
using nlohmann::json;

Graph load_dataset_for(const CondenseConfig& cfg) {
    if (cfg.dataset.empty()) throw ParameterError("dataset: no dataset directory configured");
    Graph g = load_dataset(cfg.dataset);
    if (g.splits.train.empty()) g = split_planetoid(g, cfg.per_class_train, cfg.n_val, cfg.n_test, cfg.seed);
    return g;
}

const ScaleFamily& FamilySet::for_rate(double rate) const {
    if (families.empty()) throw ParameterError("family set is empty");
    if (families.size() == 1) return families.front();
    for (const auto& f : families)
        if (std::abs(f.max_rate - rate) <= 1e-12 * std::max(1.0, rate)) return f;
    throw ParameterError("no condensed graph for rate " + std::to_string(rate));
}

FamilySet load_family_set(const fs::path& dir) {
    FamilySet set;
    const fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) {
        if (!fs::exists(dir / "synth_meta.json"))
            throw LoadError(dir.string() + ": neither manifest.json nor synth_meta.json found");
        set.families.push_back(load_family(dir));
        return set;
    }
    json j;
    try {
        std::ifstream in(manifest);
        j = json::parse(in);
        set.strategy = j.at("strategy").get<std::string>();
        for (const auto& entry : j.at("families")) set.families.push_back(load_family(dir / entry.at("dir").get<std::string>()));
    } catch (const json::exception& e) {
        throw LoadError(manifest.string() + ": " + e.what());
    }
    if (set.families.empty()) throw LoadError(manifest.string() + ": lists no families");
    return set;
}

double EvalCell::mean() const {
    if (accuracies.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

double EvalCell::stddev() const {
    if (accuracies.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean();
    double ss = 0.0;
    for (double a : accuracies) ss += (a - m) * (a - m);
    return std::sqrt(ss / static_cast<double>(accuracies.size() - 1));
}

namespace {

std::string full(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string pct1(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * v;
    return os.str();
}

}  // namespace

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "dataset,strategy,mode,ib,scale,arch,n_nodes,trials,mean,std,accuracies,seeds,config_digest\n";
    for (const auto& c : cells) {
        os << dataset << "," << strategy << "," << mode << "," << (ib_on ? "on" : "off") << "," << full(c.scale) << ","
           << c.arch << "," << c.n_nodes << "," << c.accuracies.size() << "," << full(c.mean()) << ","
           << full(c.stddev()) << ",";
        for (size_t i = 0; i < c.accuracies.size(); ++i) os << (i ? ";" : "") << full(c.accuracies[i]);
        os << ",";
        for (size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ";" : "") << c.seeds[i];
        os << "," << config_digest << "\n";
    }
    return os.str();
}

std::string EvalReport::to_markdown() const {
    std::vector<double> scales;
    std::vector<std::string> archs;
    for (const auto& c : cells) {
        if (std::find(scales.begin(), scales.end(), c.scale) == scales.end()) scales.push_back(c.scale);
        if (std::find(archs.begin(), archs.end(), c.arch) == archs.end()) archs.push_back(c.arch);
    }
    std::ostringstream os;
    os << "Dataset: " << dataset << "  strategy: " << strategy << "  mode: " << mode << "  ib: " << (ib_on ? "on" : "off")
       << "  config: " << config_digest << "\n\n";
    os << "| scale (%) |";
    for (const auto& a : archs) os << " " << a << " |";
    os << "\n|---|";
    for (size_t i = 0; i < archs.size(); ++i) os << "---|";
    os << "\n";
    for (double s : scales) {
        std::ostringstream label;
        label << std::setprecision(4) << 100.0 * s;
        os << "| " << label.str() << " |";
        for (const auto& a : archs) {
            auto it = std::find_if(cells.begin(), cells.end(), [&](const EvalCell& c) { return c.scale == s && c.arch == a; });
            if (it == cells.end()) {
                os << " - |";
                continue;
            }
            const double sd = it->stddev();
            os << " " << pct1(it->mean()) << " ± " << (std::isnan(sd) ? std::string("n/a") : pct1(sd)) << " |";
        }
        os << "\n";
    }
    if (!phase_seconds.empty()) {
        os << "\n| phase | seconds |\n|---|---|\n";
        for (const auto& [phase, sec] : phase_seconds) {
            std::ostringstream v;
            v << std::fixed << std::setprecision(2) << sec;
            os << "| " << phase << " | " << v.str() << " |\n";
        }
    }
    return os.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
}

}  // namespace

EvalReport report_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("dataset,strategy,mode,ib,scale,arch", 0) != 0)
        throw ValidationError("report csv: unexpected header");
    EvalReport rep;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != 13) throw ValidationError("report csv line " + std::to_string(lineno) + ": expected 13 fields");
        try {
            rep.dataset = f[0];
            rep.strategy = f[1];
            rep.mode = f[2];
            rep.ib_on = f[3] == "on";
            rep.config_digest = f[12];
            EvalCell c;
            c.scale = parse_double(f[4]);
            c.arch = f[5];
            c.n_nodes = std::stoll(f[6]);
            if (!f[10].empty())
                for (const auto& a : split(f[10], ';')) c.accuracies.push_back(parse_double(a));
            if (!f[11].empty())
                for (const auto& sd : split(f[11], ';')) c.seeds.push_back(std::stoull(sd));
            rep.cells.push_back(std::move(c));
        } catch (const std::logic_error&) {
            throw ValidationError("report csv line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return rep;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) { return seed * 1000003ull + static_cast<std::uint64_t>(trial); }

namespace {

TrainOptions train_options(const EvalConfig& ec) {
    TrainOptions o;
    o.epochs = ec.full ? ec.full_epochs : ec.epochs;
    o.patience = ec.full ? 0 : ec.patience;
    o.lr = ec.lr;
    o.weight_decay = ec.weight_decay;
    return o;
}

ArchParams arch_params(const EvalConfig& ec) {
    ArchParams p;
    p.cheb_order = ec.cheb_order;
    return p;
}

std::uint64_t model_seed(std::uint64_t trial, size_t arch_index) { return trial * 31 + arch_index + 7; }

// Runs fn(i) for i in [0, n) in parallel and rethrows the first failure.
template <class F>
void parallel_jobs(Index n, F fn) {
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < n; ++i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

EvalReport evaluate_families(const FamilySet& set, const Graph& g, const std::vector<double>& scales,
                             const EvalConfig& ec, std::uint64_t seed) {
    if (scales.empty()) throw ParameterError("evaluate: no scales requested");
    if (ec.trials < 1) throw ParameterError("trials: must be >= 1");
    if (g.splits.val.empty() || g.splits.test.empty()) throw ParameterError("evaluate: dataset needs val and test splits");
    const ExtractMode mode = parse_extract_mode(ec.mode);
    std::vector<Arch> archs;
    for (const auto& a : ec.archs) archs.push_back(parse_arch(a));

    EvalReport rep;
    rep.mode = ec.mode;
    rep.strategy = set.strategy.empty() ? "bimsgc" : set.strategy;
    rep.config_digest = set.families.front().config_digest;

    const Propagator prop = Propagator::of(g);
    const FeatureOperand x(g.features);
    const TrainOptions opts = train_options(ec);
    const ArchParams params = arch_params(ec);

    for (double s : scales)
        for (const auto& a : archs) {
            EvalCell c;
            c.scale = s;
            c.arch = to_string(a);
            c.accuracies.assign(static_cast<size_t>(ec.trials), 0.0);
            for (int t = 0; t < ec.trials; ++t) c.seeds.push_back(trial_seed(seed, t));
            rep.cells.push_back(std::move(c));
        }

    const Index jobs = static_cast<Index>(rep.cells.size()) * ec.trials;
    parallel_jobs(jobs, [&](Index j) {
        EvalCell& c = rep.cells[static_cast<size_t>(j / ec.trials)];
        const int t = static_cast<int>(j % ec.trials);
        const size_t arch_index = static_cast<size_t>(std::find(ec.archs.begin(), ec.archs.end(), c.arch) - ec.archs.begin());
        const std::uint64_t ts = c.seeds[t];
        SyntheticGraph sub = extract_subgraph(set.for_rate(c.scale), c.scale, mode, ts);
        Propagator sp = Propagator::of(sub);
        FeatureOperand sx(sub.features);
        std::vector<Index> all(static_cast<size_t>(sub.n_nodes));
        std::iota(all.begin(), all.end(), Index{0});
        DataView train{&sp, &sx, &sub.labels, all};
        DataView val{&prop, &x, &g.labels, g.splits.val};
        DataView test{&prop, &x, &g.labels, g.splits.test};
        GnnModel m = build_model(parse_arch(c.arch), g.feature_dim(), g.n_classes, ec.hidden, ec.depth,
                                 model_seed(ts, arch_index), params);
        TrainOutcome out = train_classifier(std::move(m), train, &val, opts);
        c.accuracies[t] = evaluate(out.model, test);
        if (t == 0) c.n_nodes = sub.n_nodes;
    });
    return rep;
}

EvalCell evaluate_whole_graph(const Graph& g, const std::string& arch, const EvalConfig& ec, std::uint64_t seed) {
    if (ec.trials < 1) throw ParameterError("trials: must be >= 1");
    const Arch a = parse_arch(arch);
    const Propagator prop = Propagator::of(g);
    const FeatureOperand x(g.features);
    EvalCell c;
    c.scale = 1.0;
    c.arch = arch;
    c.n_nodes = g.n_nodes;
    c.accuracies.assign(static_cast<size_t>(ec.trials), 0.0);
    for (int t = 0; t < ec.trials; ++t) c.seeds.push_back(trial_seed(seed, t));
    parallel_jobs(ec.trials, [&](Index t) {
        DataView train{&prop, &x, &g.labels, g.splits.train};
        DataView val{&prop, &x, &g.labels, g.splits.val};
        DataView test{&prop, &x, &g.labels, g.splits.test};
        GnnModel m = build_model(a, g.feature_dim(), g.n_classes, ec.hidden, ec.depth, model_seed(c.seeds[t], 0),
                                 arch_params(ec));
        TrainOutcome out = train_classifier(std::move(m), train, &val, train_options(ec));
        c.accuracies[t] = evaluate(out.model, test);
    });
    return c;
}

std::vector<MiRow> mi_diagnostics(const ScaleFamily& f, const Graph& g, const std::vector<double>& scales,
                                  ExtractMode mode, std::uint64_t seed, int hops) {
    const Matrix orig = graph_repr(g, hops);
    const Index width = orig.cols();
    Matrix class_mean = Matrix::Zero(g.n_classes, width);
    std::vector<Index> count(static_cast<size_t>(g.n_classes), 0);
    for (Index v : g.splits.train) {
        class_mean.row(g.labels[v]) += orig.row(v);
        ++count[g.labels[v]];
    }
    for (int c = 0; c < g.n_classes; ++c)
        if (count[c] > 0) class_mean.row(c) /= static_cast<double>(count[c]);
    const Matrix large = graph_repr(f.large, hops);

    std::vector<MiRow> rows;
    for (double s : scales) {
        auto nodes = extraction_nodes(f, s, mode, seed);
        SyntheticGraph sub = restrict_synthetic(f.large, nodes, static_cast<Index>(nodes.size()));
        const Matrix rs = graph_repr(sub, hops);
        const Index n = rs.rows();
        const int k = static_cast<int>(std::min<Index>(5, n - 1));
        if (k < 1) throw ParameterError("mi: scale " + std::to_string(s) + " leaves fewer than two nodes");
        std::mt19937_64 rng(seed + 0x3c);
        std::uniform_real_distribution<double> jitter(0.0, 1e-10);
        Matrix paired_orig(n, width), paired_large(n, large.cols());
        for (Index i = 0; i < n; ++i) {
            paired_orig.row(i) = class_mean.row(sub.labels[i]);
            for (Index j = 0; j < width; ++j) paired_orig(i, j) += jitter(rng);
            paired_large.row(i) = large.row(nodes[i]);
        }
        MiRow row;
        row.scale = s;
        row.n_nodes = n;
        row.with_original = ksg_mi(rs, paired_orig, k).value;
        MiEstimate self = ksg_mi(rs, paired_large, k);
        row.self = self.infinite();
        row.with_condensed = self.value;
        rows.push_back(row);
    }
    return rows;
}

std::string mi_to_csv(const std::vector<MiRow>& rows, const std::string& config_digest) {
    std::ostringstream os;
    os << "scale,n_nodes,I_with_original,I_with_condensed,flag,config_digest\n";
    for (const auto& r : rows)
        os << full(r.scale) << "," << r.n_nodes << "," << full(r.with_original) << ","
           << (r.self ? std::string("NA") : full(r.with_condensed)) << "," << (r.self ? "self_mi" : "") << ","
           << config_digest << "\n";
    return os.str();
}

}  // namespace bimsgc
