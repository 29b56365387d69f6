#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/config.hpp"
#include "bimsgc/graph.hpp"
#include "bimsgc/optimize.hpp"
#include "bimsgc/synth.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace bimsgc {

struct MiEstimate {
    double value = 0.0;  // nats, clamped at 0 for reporting; +inf for the identical-sample sentinel
    double raw = 0.0;    // unclamped estimate
    Index k_neighbors = 0;
    Index n_samples = 0;
    std::string estimator;  // "ksg" | "plugin_discrete"
    bool infinite() const { return value == std::numeric_limits<double>::infinity(); }
};

/// Kraskov-Stoegbauer-Grassberger estimator (first variant, max-norm):
/// psi(k) + psi(n) - < psi(n_x + 1) + psi(n_y + 1) >.
/// x == y bitwise gives the +inf sentinel; all joint samples identical throws NumericError.
MiEstimate ksg_mi(const Matrix& x, const Matrix& y, int k);

/// One-hot rows with uniform jitter in [0, jitter) (seeded), for discrete labels.
Matrix jittered_one_hot(const std::vector<int>& labels, int n_classes, double jitter, std::uint64_t seed);

/// Plug-in MI of two discrete symbol sequences (natural log).
double plugin_mi(const std::vector<Index>& a, const std::vector<Index>& b);

inline constexpr std::uint64_t kReprSeed = 0x5eed;

/// Ahat^hops X followed by a seeded orthonormal projection to min(16, D)
/// columns. The projection depends only on (D, seed), so representations of
/// graphs sharing a feature space are comparable.
Matrix graph_repr(const Graph& g, int hops, std::uint64_t seed = kReprSeed);
Matrix graph_repr(const SyntheticGraph& s, int hops, std::uint64_t seed = kReprSeed);
Matrix propagate_and_project(const Matrix& propagated, std::uint64_t seed);

struct ProbeOptions {
    int epochs = 100;
    int hops = 1;
    int k_neighbors = 5;
};

/// Probe-condenses at the max scale, then for each candidate fraction takes the
/// class-balanced prefix of the probe graph, fine-tunes it for probe.epochs and
/// scores J = I(repr(sub); Y') - beta_ib * I(repr(probe rows of sub); repr(sub)).
/// Highest J wins; ties go to the smaller fraction.
MesoSelection select_meso(const CondenseContext& ctx, const CondenseConfig& cfg,
                          const std::vector<double>& candidates, double beta_ib, const ProbeOptions& probe);

struct OracleRow {
    Index size = 0;
    double informativeness = 0.0;
    double compression = 0.0;
    double objective = 0.0;
    Index subsets = 0;
};

/// Exhaustive objective on a tiny graph: for every size from C to max_subgraph
/// with equal per-class counts (multiples of C), the max over subsets of
/// I(sub; Y) - beta_ib * I(G; sub) with plug-in MI on 1-hop propagated
/// features quantized to 8 equal-width bins per dimension.
std::vector<OracleRow> brute_force_meso_oracle(const Graph& g, Index max_subgraph, double beta_ib,
                                               Index budget = 1'000'000);

}  // namespace bimsgc
