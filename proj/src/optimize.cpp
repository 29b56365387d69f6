#include "bimsgc/optimize.hpp"

#include "bimsgc/miest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace bimsgc {

AdamState make_optimizer(const std::string& kind) {
    AdamState st;
    if (kind == "sgd") {
        st.sgd = true;
    } else if (kind != "adam") {
        throw ParameterError("optimizer: expected adam or sgd, got '" + kind + "'");
    }
    return st;
}

void adam_step(AdamState& st, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, double lr, std::span<const double> lr_scale) {
    if (params.size() != grads.size()) throw DimensionError("adam_step: params and grads differ in count");
    if (!lr_scale.empty() && lr_scale.size() != params.size())
        throw DimensionError("adam_step: one lr scale per tensor expected");
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.push_back(Vector::Zero(static_cast<Index>(p.size())));
            st.v.push_back(Vector::Zero(static_cast<Index>(p.size())));
        }
    }
    if (st.m.size() != params.size()) throw DimensionError("adam_step: tensor count changed between steps");
    for (size_t t = 0; t < params.size(); ++t) {
        if (params[t].size() != grads[t].size() || static_cast<Index>(params[t].size()) != st.m[t].size())
            throw DimensionError("adam_step: shape mismatch in tensor " + std::to_string(t));
        for (double g : grads[t])
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient at optimizer step " + std::to_string(st.step + 1));
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (size_t t = 0; t < params.size(); ++t) {
        const double rate = lr * (lr_scale.empty() ? 1.0 : lr_scale[t]);
        auto p = params[t];
        auto g = grads[t];
        if (st.sgd) {
            for (size_t i = 0; i < p.size(); ++i) p[i] -= rate * g[i];
            continue;
        }
        Vector& m = st.m[t];
        Vector& v = st.v[t];
        for (size_t i = 0; i < p.size(); ++i) {
            const auto k = static_cast<Index>(i);
            m(k) = st.beta1 * m(k) + (1.0 - st.beta1) * g[i];
            v(k) = st.beta2 * v(k) + (1.0 - st.beta2) * g[i] * g[i];
            p[i] -= rate * (m(k) / c1) / (std::sqrt(v(k) / c2) + st.eps);
        }
    }
}

namespace {

template <class M>
std::span<double> span_of(M& m) {
    return {m.data(), static_cast<size_t>(m.size())};
}

template <class M>
std::span<const double> cspan_of(const M& m) {
    return {m.data(), static_cast<size_t>(m.size())};
}

void check_finite(double v, const char* phase, int epoch) {
    if (!std::isfinite(v))
        throw NumericError(std::string(phase) + ": loss diverged at epoch " + std::to_string(epoch));
}

std::vector<Index> iota_nodes(Index n) {
    std::vector<Index> v(static_cast<size_t>(n));
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

LossWeights weights_of(const CondenseConfig& cfg) { return {cfg.alpha, cfg.beta_d, cfg.gamma}; }

MatchOptions match_of(const CondenseConfig& cfg) {
    MatchOptions m;
    m.size_normalized = cfg.size_normalized;
    return m;
}

CondenseContext make_context(const Graph& g, const CondenseConfig& cfg) {
    CondenseContext ctx;
    ctx.g = &g;
    Index k = std::max<Index>(1, std::llround(cfg.max_rate() * static_cast<double>(g.n_nodes)));
    k = std::min(k, g.n_nodes);
    ctx.sb = eigs_smallest(normalized_laplacian(g), k, cfg.spectral_tol, cfg.seed);
    ctx.targets = target_stats(g, ctx.sb);
    return ctx;
}

TrainTrace refine(SyntheticGraph& s, const TargetStats& t, const CondenseConfig& cfg, int epochs,
                  AdamState* state_out) {
    TrainTrace trace;
    AdamState st = make_optimizer(cfg.optimizer);
    const LossWeights w = weights_of(cfg);
    const MatchOptions match = match_of(cfg);
    for (int e = 0; e <= epochs; ++e) {
        LossValueGrad r = total_loss(s, t, w, nullptr, match);
        check_finite(r.value, "meso training", e);
        trace.loss.push_back(r.value);
        if (e == epochs) break;
        adam_step(st, {span_of(s.features), span_of(s.eigenbasis)},
                  {cspan_of(r.grad_features), cspan_of(r.grad_eigenbasis)}, cfg.lr);
    }
    if (state_out) *state_out = std::move(st);
    return trace;
}

PhaseResult train_meso(const CondenseContext& ctx, const CondenseConfig& cfg, double rate, int epochs,
                       std::uint64_t seed) {
    const Graph& g = *ctx.g;
    auto counts = class_balanced_counts(rate, g.n_nodes, g.n_classes, g.class_sizes());
    InitOptions init;
    init.noise_scale = cfg.init_noise;
    init.mask_logit = cfg.init_logit;
    PhaseResult out;
    out.graph = init_synthetic(g, counts, ctx.sb, seed, init);
    out.trace = refine(out.graph, ctx.targets, cfg, epochs, &out.optimizer);
    return out;
}

PhaseResult train_meso(const CondenseContext& ctx, const CondenseConfig& cfg, double rate) {
    return train_meso(ctx, cfg, rate, cfg.e1, cfg.seed);
}

DownResult train_down(const SyntheticGraph& meso, const TargetStats& t, const CondenseConfig& cfg,
                      double target_fraction, bool use_ib) {
    DownResult out;
    out.graph = meso;
    SyntheticGraph& s = out.graph;
    AdamState st = make_optimizer(cfg.optimizer);
    const LossWeights w = weights_of(cfg);
    const MatchOptions match = match_of(cfg);
    const double theta0 = cfg.theta;
    const double theta1 = std::clamp(target_fraction, 0.01, 0.99);
    const std::vector<double> scale{cfg.down_lr_scale, cfg.down_lr_scale, 1.0};
    const int epochs = cfg.e_down;
    for (int e = 0; e <= epochs; ++e) {
        const double frac = epochs > 1 ? static_cast<double>(std::min(e, epochs - 1)) / (epochs - 1) : 1.0;
        const double theta = theta0 + (theta1 - theta0) * frac;
        LossValueGrad r;
        if (use_ib) {
            r = scib_loss(s, t, theta, cfg.beta_ib, w, match);
        } else {
            Vector m = s.mask();
            r = total_loss(s, t, w, &m, match);
        }
        check_finite(r.value, "down phase", e);
        out.trace.loss.push_back(r.value);
        if (e == epochs) break;
        adam_step(st, {span_of(s.features), span_of(s.eigenbasis), span_of(s.mask_logits)},
                  {cspan_of(r.grad_features), cspan_of(r.grad_eigenbasis), cspan_of(r.grad_mask_logits)}, cfg.lr,
                  scale);
    }
    out.scores = s.mask();
    out.optimizer = std::move(st);
    return out;
}

UpResult train_up(const SyntheticGraph& meso, const CondenseContext& ctx, const CondenseConfig& cfg,
                  const std::vector<Index>& large_counts, bool use_ib) {
    const Graph& g = *ctx.g;
    const auto meso_counts = meso.class_counts();
    if (large_counts.size() != meso_counts.size()) throw DimensionError("train_up: class count mismatch");
    std::vector<Index> extra(large_counts.size());
    for (size_t c = 0; c < extra.size(); ++c) {
        if (large_counts[c] < meso_counts[c]) throw DimensionError("train_up: large scale has fewer nodes than meso");
        extra[c] = large_counts[c] - meso_counts[c];
    }
    const Index n_meso = meso.n_nodes;
    const Index n_exp = std::accumulate(extra.begin(), extra.end(), Index{0});
    UpResult out;
    if (n_exp == 0) {
        out.large = meso;
        return out;
    }

    InitOptions init;
    init.noise_scale = cfg.init_noise;
    init.mask_logit = cfg.init_logit;
    SyntheticGraph fresh = init_synthetic(g, extra, ctx.sb, cfg.seed + 0x1f, init);

    const Index n = n_meso + n_exp;
    if (n > ctx.sb.k) throw DimensionError("train_up: spectrum has fewer pairs than the large scale");
    SyntheticGraph& s = out.large;
    s.n_nodes = n;
    s.n_classes = meso.n_classes;
    s.k_active = n;
    s.features.resize(n, meso.feature_dim());
    s.features << meso.features, fresh.features;
    s.labels = meso.labels;
    s.labels.insert(s.labels.end(), fresh.labels.begin(), fresh.labels.end());
    s.mask_logits.resize(n);
    s.mask_logits << meso.mask_logits, fresh.mask_logits;
    s.shared_eigenvalues = ctx.sb.eigenvalues.head(n);
    // new columns live on the expansion rows only, so they are orthogonal to
    // the meso columns already and those stay exactly as trained
    if (meso.k_active != n_meso) throw DimensionError("train_up: meso eigenbasis must be square");
    const Index n_new = n_exp;
    ColMatrix block(n_exp, n_new);
    std::mt19937_64 rng(cfg.seed + 0x2f);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Index j = 0; j < n_new; ++j)
        for (Index i = 0; i < n_exp; ++i) block(i, j) = nd(rng);
    s.eigenbasis = ColMatrix::Zero(n, n);
    s.eigenbasis.topLeftCorner(n_meso, meso.k_active) = meso.eigenbasis;
    s.eigenbasis.bottomRightCorner(n_exp, n_new) = orthonormalize_columns(block);

    std::vector<Index> exp_nodes(static_cast<size_t>(n_exp));
    std::iota(exp_nodes.begin(), exp_nodes.end(), n_meso);
    const auto meso_nodes = iota_nodes(n_meso);

    AdamState st = make_optimizer(cfg.optimizer);
    const LossWeights w = weights_of(cfg);
    const MatchOptions match = match_of(cfg);
    const std::vector<double> scale{cfg.down_lr_scale, 1.0, cfg.down_lr_scale, 1.0, 1.0};
    for (int e = 0; e <= cfg.e2; ++e) {
        Vector m = s.mask();
        m.head(n_meso).setOnes();
        LossValueGrad r = total_loss(s, ctx.targets, w, &m, match);
        SyntheticGraph view = restrict_synthetic(s, meso_nodes, n_meso);
        LossValueGrad inner = total_loss(view, ctx.targets, w, nullptr, match);
        // the meso block is held by its own term only; the large term shapes
        // expansion rows and the cross blocks of U'
        r.grad_features.topRows(n_meso).setZero();
        r.grad_eigenbasis.topLeftCorner(n_meso, n_meso).setZero();
        r.value += inner.value;
        r.grad_features.topRows(n_meso) += inner.grad_features;
        r.grad_eigenbasis.topLeftCorner(n_meso, n_meso) += inner.grad_eigenbasis;
        if (use_ib) r.value += bernoulli_kl_term(s.mask_logits, exp_nodes, cfg.theta, cfg.beta_ib, r.grad_mask_logits);
        check_finite(r.value, "up phase", e);
        out.trace.loss.push_back(r.value);
        if (e == cfg.e2) break;
        // meso rows of X' and meso columns of U' (contiguous in row- and
        // column-major storage) move at the reduced rate, expansion ones at lr
        const size_t xm = static_cast<size_t>(n_meso * s.features.cols());
        const size_t um = static_cast<size_t>(n_meso * n);
        auto xs = span_of(s.features), us = span_of(s.eigenbasis);
        auto gx = cspan_of(r.grad_features), gu = cspan_of(r.grad_eigenbasis);
        adam_step(st, {xs.first(xm), xs.subspan(xm), us.first(um), us.subspan(um), span_of(s.mask_logits)},
                  {gx.first(xm), gx.subspan(xm), gu.first(um), gu.subspan(um), cspan_of(r.grad_mask_logits)},
                  cfg.lr, scale);
    }
    out.expansion_mask = s.mask().tail(n_exp);
    out.optimizer = std::move(st);
    return out;
}

Vector nested_scores(const Vector& meso_scores, const Vector& expansion_mask) {
    Vector out(meso_scores.size() + expansion_mask.size());
    const double floor = meso_scores.size() > 0 ? meso_scores.minCoeff() : 1.0;
    out << meso_scores, expansion_mask * floor;
    return out;
}

namespace {

ScaleFamily assemble(const Graph& g, const CondenseConfig& cfg, const SyntheticGraph& large, Index n_meso,
                     double meso_rate, double max_rate, Vector scores) {
    ScaleFamily f;
    f.large = large;
    f.meso = restrict_synthetic(large, iota_nodes(n_meso), n_meso);
    f.node_scores = std::move(scores);
    f.meso_rate = meso_rate;
    f.max_rate = max_rate;
    f.config_digest = config_digest(cfg);
    f.n_original = g.n_nodes;
    f.original_class_sizes = g.class_sizes();
    return f;
}

}  // namespace

CondenseOutput run_bimsgc(const Graph& g, const CondenseConfig& cfg) {
    validate(cfg);
    CondenseOutput out;
    Stopwatch sw;
    CondenseContext ctx = make_context(g, cfg);
    out.timings.push_back({"spectral", sw.seconds()});

    const double max_rate = cfg.max_rate();
    Stopwatch sel_sw;
    if (cfg.meso_candidates.size() == 1) {
        out.selection.fraction = cfg.meso_candidates[0];
        out.selection.rate = cfg.meso_candidates[0] * max_rate;
        CandidateScore cs;
        cs.fraction = out.selection.fraction;
        cs.rate = out.selection.rate;
        cs.note = "single candidate";
        out.selection.candidates.push_back(cs);
    } else {
        ProbeOptions probe;
        probe.epochs = cfg.probe_epochs;
        out.selection = select_meso(ctx, cfg, cfg.meso_candidates, cfg.beta_ib, probe);
    }
    out.timings.push_back({"select_meso", sel_sw.seconds()});
    const double meso_rate = out.selection.rate;

    Stopwatch meso_sw;
    PhaseResult meso = train_meso(ctx, cfg, meso_rate);
    out.traces.emplace_back("meso", meso.trace);
    out.timings.push_back({"meso", meso_sw.seconds()});

    Stopwatch down_sw;
    DownResult down = train_down(meso.graph, ctx.targets, cfg, cfg.min_rate() / meso_rate);
    out.traces.emplace_back("down", down.trace);
    out.timings.push_back({"down", down_sw.seconds()});

    Stopwatch up_sw;
    auto large_counts = class_balanced_counts(max_rate, g.n_nodes, g.n_classes, g.class_sizes());
    UpResult up = train_up(meso.graph, ctx, cfg, large_counts);
    out.traces.emplace_back("up", up.trace);
    out.timings.push_back({"up", up_sw.seconds()});

    out.families.push_back(assemble(g, cfg, up.large, meso.graph.n_nodes, meso_rate, max_rate,
                                    nested_scores(down.scores, up.expansion_mask)));
    out.optimizers.push_back(up.expansion_mask.size() > 0 ? up.optimizer : meso.optimizer);
    return out;
}

CondenseOutput run_baseline(const Graph& g, const CondenseConfig& cfg, const std::string& strategy) {
    validate(cfg);
    CondenseOutput out;
    Stopwatch sw;
    CondenseContext ctx = make_context(g, cfg);
    out.timings.push_back({"spectral", sw.seconds()});
    const double max_rate = cfg.max_rate(), min_rate = cfg.min_rate();

    if (strategy == "recondense") {
        for (double r : cfg.scales) {
            Stopwatch t;
            PhaseResult p = train_meso(ctx, cfg, r);
            out.traces.emplace_back("recondense_" + std::to_string(r), p.trace);
            out.timings.push_back({"recondense", t.seconds()});
            out.families.push_back(
                assemble(g, cfg, p.graph, p.graph.n_nodes, r, r, Vector::Ones(p.graph.n_nodes)));
            out.optimizers.push_back(p.optimizer);
        }
    } else if (strategy == "large_to_small") {
        Stopwatch t;
        PhaseResult big = train_meso(ctx, cfg, max_rate);
        out.traces.emplace_back("large", big.trace);
        out.timings.push_back({"large", t.seconds()});
        Stopwatch d;
        DownResult down = train_down(big.graph, ctx.targets, cfg, min_rate / max_rate, false);
        out.traces.emplace_back("down", down.trace);
        out.timings.push_back({"down", d.seconds()});
        out.families.push_back(assemble(g, cfg, big.graph, big.graph.n_nodes, max_rate, max_rate, down.scores));
        out.optimizers.push_back(big.optimizer);
    } else if (strategy == "small_to_large") {
        Stopwatch t;
        PhaseResult small = train_meso(ctx, cfg, min_rate);
        out.traces.emplace_back("small", small.trace);
        out.timings.push_back({"small", t.seconds()});
        Stopwatch u;
        auto large_counts = class_balanced_counts(max_rate, g.n_nodes, g.n_classes, g.class_sizes());
        UpResult up = train_up(small.graph, ctx, cfg, large_counts, false);
        out.traces.emplace_back("up", up.trace);
        out.timings.push_back({"up", u.seconds()});
        out.families.push_back(assemble(g, cfg, up.large, small.graph.n_nodes, min_rate, max_rate,
                                        nested_scores(Vector::Ones(small.graph.n_nodes), up.expansion_mask)));
        out.optimizers.push_back(up.expansion_mask.size() > 0 ? up.optimizer : small.optimizer);
    } else {
        throw ParameterError("strategy: unknown baseline '" + strategy + "'");
    }
    return out;
}

CondenseOutput run_strategy(const Graph& g, const CondenseConfig& cfg) {
    if (cfg.strategy == "bimsgc") return run_bimsgc(g, cfg);
    return run_baseline(g, cfg, cfg.strategy);
}

}  // namespace bimsgc
