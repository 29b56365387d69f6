#include "bimsgc/optimize.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace bimsgc;
using namespace bimsgc::testing;

namespace {

Graph sbm60() {
    Graph g = generate_sbm(60, 3, 0.3, 0.05, 8, 3);
    return split_planetoid(g, 5, 10, 20, 3);
}

CondenseConfig toy_config() {
    CondenseConfig cfg;
    cfg.scales = {0.1, 0.2, 0.3};
    cfg.meso_candidates = {0.5};
    cfg.lr = 0.01;
    cfg.e1 = 60;
    cfg.e2 = 60;
    cfg.e_down = 30;
    cfg.probe_epochs = 10;
    return cfg;
}

std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

bool same_graph(const SyntheticGraph& a, const SyntheticGraph& b) {
    return a.features == b.features && a.eigenbasis == b.eigenbasis && a.mask_logits == b.mask_logits &&
           a.labels == b.labels;
}

}  // namespace

TEST(Adam, ZeroGradsLeaveParams) {
    AdamState st = make_optimizer("adam");
    std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
    adam_step(st, {std::span<double>(p)}, {std::span<const double>(g)}, 0.1);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, SgdLiteralUpdate) {
    AdamState st = make_optimizer("sgd");
    std::vector<double> p{0.0}, g{1.0};
    adam_step(st, {std::span<double>(p)}, {std::span<const double>(g)}, 0.1);
    EXPECT_DOUBLE_EQ(p[0], -0.1);
}

TEST(Adam, ConvergesOnQuadratic) {
    AdamState st = make_optimizer("adam");
    std::vector<double> x{5.0}, g{0.0};
    for (int i = 0; i < 200; ++i) {
        g[0] = 2.0 * x[0];
        adam_step(st, {std::span<double>(x)}, {std::span<const double>(g)}, 0.1);
    }
    EXPECT_LE(std::abs(x[0]), 1e-2);
}

TEST(Adam, FirstStepMovesByLr) {
    AdamState st = make_optimizer("adam");
    std::vector<double> x{1.0}, g{3.7};
    adam_step(st, {std::span<double>(x)}, {std::span<const double>(g)}, 0.01);
    EXPECT_NEAR(x[0], 1.0 - 0.01, 1e-9);
}

TEST(Adam, LrScalePerTensor) {
    AdamState st = make_optimizer("sgd");
    std::vector<double> a{0.0}, b{0.0}, g{1.0};
    std::vector<double> scale{0.1, 1.0};
    adam_step(st, {std::span<double>(a), std::span<double>(b)},
              {std::span<const double>(g), std::span<const double>(g)}, 1.0, scale);
    EXPECT_DOUBLE_EQ(a[0], -0.1);
    EXPECT_DOUBLE_EQ(b[0], -1.0);
}

TEST(Adam, NonFiniteGradientNamesStep) {
    AdamState st = make_optimizer("adam");
    std::vector<double> x{1.0}, g{0.5};
    adam_step(st, {std::span<double>(x)}, {std::span<const double>(g)}, 0.1);
    g[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(st, {std::span<double>(x)}, {std::span<const double>(g)}, 0.1);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
    }
}

TEST(Adam, ShapeMismatch) {
    AdamState st = make_optimizer("adam");
    std::vector<double> x{1.0, 2.0}, g{0.5};
    EXPECT_THROW(adam_step(st, {std::span<double>(x)}, {std::span<const double>(g)}, 0.1), DimensionError);
    EXPECT_THROW(make_optimizer("rmsprop"), ParameterError);
}

TEST(TrainMeso, ZeroEpochsReturnsInit) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult r = train_meso(ctx, cfg, 0.2, 0, 9);
    auto counts = class_balanced_counts(0.2, 60, 3, g.class_sizes());
    InitOptions init;
    SyntheticGraph fresh = init_synthetic(g, counts, ctx.sb, 9, init);
    EXPECT_TRUE(same_graph(r.graph, fresh));
    EXPECT_EQ(r.trace.loss.size(), 1u);
}

TEST(TrainMeso, ReducesLoss) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult r = train_meso(ctx, cfg, 0.3, 300, 1);
    ASSERT_EQ(r.trace.loss.size(), 301u);
    EXPECT_LT(r.trace.loss.back(), 0.2 * r.trace.loss.front())
        << r.trace.loss.front() << " -> " << r.trace.loss.back();
}

TEST(TrainMeso, DeterministicAndMaskFrozen) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult a = train_meso(ctx, cfg, 0.2, 40, 5);
    PhaseResult b = train_meso(ctx, cfg, 0.2, 40, 5);
    EXPECT_TRUE(same_graph(a.graph, b.graph));
    EXPECT_TRUE(a.graph.mask_logits == Vector::Constant(a.graph.n_nodes, cfg.init_logit));
}

TEST(TrainMeso, DivergenceReported) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.optimizer = "sgd";
    cfg.lr = 1e12;
    CondenseContext ctx = make_context(g, cfg);
    EXPECT_THROW(train_meso(ctx, cfg, 0.2, 50, 1), NumericError);
}

TEST(TrainDown, NoEpochsNoPriorGivesFlatScores) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.beta_ib = 0.0;
    cfg.e_down = 0;
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult meso = train_meso(ctx, cfg, 0.2, 10, 1);
    DownResult d = train_down(meso.graph, ctx.targets, cfg, 0.5);
    ASSERT_EQ(d.scores.size(), meso.graph.n_nodes);
    for (Index i = 0; i < d.scores.size(); ++i) EXPECT_EQ(d.scores(i), d.scores(0));
}

TEST(TrainDown, ZeroFeatureNodeScoresLowest) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.beta_ib = 1.0;
    cfg.e_down = 50;
    cfg.lr = 0.05;
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult meso = train_meso(ctx, cfg, 0.2, 100, 1);
    SyntheticGraph s = meso.graph;
    const Index dead = 4;
    s.features.row(dead).setZero();

    // leave-one-out oracle: dropping the zero row costs nothing, dropping any other row costs more
    auto loo = [&](Index drop) {
        Vector m = Vector::Ones(s.n_nodes);
        m(drop) = 0.0;
        return total_loss(s, ctx.targets, weights_of(cfg), &m, match_of(cfg)).value;
    };
    const double base = total_loss(s, ctx.targets, weights_of(cfg), nullptr, match_of(cfg)).value;
    EXPECT_NEAR(loo(dead), base, 1e-12 * std::max(1.0, base));

    DownResult d = train_down(s, ctx.targets, cfg, 0.5);
    Index argmin = 0;
    d.scores.minCoeff(&argmin);
    EXPECT_EQ(argmin, dead) << d.scores.transpose();
}

TEST(TrainUp, SameScaleReturnsMeso) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult meso = train_meso(ctx, cfg, 0.2, 5, 1);
    UpResult up = train_up(meso.graph, ctx, cfg, meso.graph.class_counts());
    EXPECT_TRUE(same_graph(up.large, meso.graph));
    EXPECT_EQ(up.expansion_mask.size(), 0);
}

TEST(TrainUp, ZeroEpochsAppendsFreshRows) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.e2 = 0;
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult meso = train_meso(ctx, cfg, 0.1, 20, 1);
    auto large_counts = class_balanced_counts(0.3, 60, 3, g.class_sizes());
    UpResult up = train_up(meso.graph, ctx, cfg, large_counts);
    const Index nm = meso.graph.n_nodes;
    ASSERT_EQ(up.large.n_nodes, 18);
    EXPECT_TRUE(up.large.features.topRows(nm) == meso.graph.features);
    EXPECT_TRUE(up.large.eigenbasis.topLeftCorner(nm, nm) == meso.graph.eigenbasis);
    EXPECT_TRUE(up.large.eigenbasis.topRightCorner(nm, 18 - nm).isZero(0.0));

    PhaseResult fresh = train_meso(ctx, cfg, 0.1, 0, 1);
    UpResult up0 = train_up(fresh.graph, ctx, cfg, large_counts);
    ColMatrix gram = up0.large.eigenbasis.transpose() * up0.large.eigenbasis;
    EXPECT_LE((gram - ColMatrix::Identity(18, 18)).norm(), 1e-10);
    EXPECT_EQ(up.large.class_counts(), large_counts);
    EXPECT_EQ(up.expansion_mask.size(), 18 - nm);
}

TEST(TrainUp, MesoStaysInformative) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.e2 = 200;
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult meso = train_meso(ctx, cfg, 0.1, 200, 1);
    auto large_counts = class_balanced_counts(0.3, 60, 3, g.class_sizes());
    UpResult up = train_up(meso.graph, ctx, cfg, large_counts);
    std::vector<Index> prefix;
    for (Index i = 0; i < meso.graph.n_nodes; ++i) prefix.push_back(i);
    SyntheticGraph view = restrict_synthetic(up.large, prefix, meso.graph.n_nodes);
    double restricted = total_loss(view, ctx.targets, weights_of(cfg), nullptr, match_of(cfg)).value;
    EXPECT_LE(restricted, 1.5 * meso.trace.loss.back()) << meso.trace.loss.back();
}

TEST(TrainUp, RejectsShrinkingCounts) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    CondenseContext ctx = make_context(g, cfg);
    PhaseResult meso = train_meso(ctx, cfg, 0.2, 0, 1);
    EXPECT_THROW(train_up(meso.graph, ctx, cfg, {1, 1, 1}), DimensionError);
}

TEST(NestedScores, ExpansionBelowMeso) {
    Vector meso(3), expansion(2);
    meso << 0.9, 0.4, 0.7;
    expansion << 0.99, 0.5;
    Vector s = nested_scores(meso, expansion);
    ASSERT_EQ(s.size(), 5);
    EXPECT_LT(s.tail(2).maxCoeff(), meso.minCoeff());
}

TEST(RunBimsgc, SingleCandidateFamily) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    CondenseOutput out = run_bimsgc(g, cfg);
    ASSERT_EQ(out.families.size(), 1u);
    const ScaleFamily& f = out.families[0];
    EXPECT_DOUBLE_EQ(out.selection.fraction, 0.5);
    EXPECT_EQ(f.large.n_nodes, 18);
    EXPECT_EQ(f.meso.n_nodes, 9);
    EXPECT_EQ(f.node_scores.size(), 18);
    EXPECT_TRUE(f.meso.features == f.large.features.topRows(9));
    EXPECT_EQ(f.config_digest, config_digest(cfg));
    EXPECT_LT(f.node_scores.tail(9).maxCoeff(), f.node_scores.head(9).minCoeff());
    std::set<std::string> phases;
    for (const auto& t : out.timings) phases.insert(t.phase);
    EXPECT_EQ(phases, (std::set<std::string>{"spectral", "select_meso", "meso", "down", "up"}));
}

TEST(RunBimsgc, NestingAcrossScales) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    const ScaleFamily f = run_bimsgc(g, cfg).families[0];
    for (size_t a = 0; a < cfg.scales.size(); ++a)
        for (size_t b = a + 1; b < cfg.scales.size(); ++b) {
            auto small = extraction_nodes(f, cfg.scales[a], ExtractMode::Ranked, 0);
            auto big = extraction_nodes(f, cfg.scales[b], ExtractMode::Ranked, 0);
            EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
        }
}

TEST(RunBimsgc, Deterministic) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.meso_candidates = {0.2, 0.5, 0.8};
    CondenseOutput a = run_bimsgc(g, cfg), b = run_bimsgc(g, cfg);
    EXPECT_TRUE(same_graph(a.families[0].large, b.families[0].large));
    EXPECT_TRUE(a.families[0].node_scores == b.families[0].node_scores);
    EXPECT_EQ(a.selection.fraction, b.selection.fraction);
    EXPECT_EQ(a.selection.candidates.size(), 3u);
}

TEST(RunBimsgc, CoraShapedLargeGraphSize) {
    Graph g = cora_standin();
    CondenseConfig cfg;
    cfg.meso_candidates = {0.5};
    cfg.e1 = 2;
    cfg.e2 = 2;
    cfg.e_down = 2;
    const ScaleFamily f = run_bimsgc(g, cfg).families[0];
    EXPECT_EQ(f.large.n_nodes, 54);
    EXPECT_EQ(f.meso.n_nodes, 27);
}

TEST(RunBaseline, RecondenseOneGraphPerScale) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    cfg.scales = {0.1, 0.2};
    CondenseOutput out = run_baseline(g, cfg, "recondense");
    ASSERT_EQ(out.families.size(), 2u);
    EXPECT_EQ(out.families[0].large.n_nodes, 6);
    EXPECT_EQ(out.families[1].large.n_nodes, 12);
    size_t epochs = 0;
    for (const auto& [name, trace] : out.traces) epochs += trace.loss.size() - 1;
    EXPECT_EQ(epochs, static_cast<size_t>(2 * cfg.e1));
}

TEST(RunBaseline, LargeToSmallScoresEveryNode) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    const ScaleFamily f = run_baseline(g, cfg, "large_to_small").families[0];
    EXPECT_EQ(f.large.n_nodes, 18);
    EXPECT_EQ(f.node_scores.size(), 18);
    EXPECT_TRUE(f.node_scores.allFinite());
}

TEST(RunBaseline, SmallToLargeKeepsSmallPrefix) {
    Graph g = sbm60();
    CondenseConfig cfg = toy_config();
    const ScaleFamily f = run_baseline(g, cfg, "small_to_large").families[0];
    EXPECT_EQ(f.meso.n_nodes, 6);
    EXPECT_EQ(f.large.n_nodes, 18);
    auto small = extraction_nodes(f, 0.1, ExtractMode::Ranked, 0);
    EXPECT_EQ(small, (std::vector<Index>{0, 1, 2, 3, 4, 5}));
}

TEST(RunBaseline, UnknownStrategy) {
    Graph g = sbm60();
    EXPECT_THROW(run_baseline(g, toy_config(), "sideways"), ParameterError);
}
