#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/config.hpp"
#include "bimsgc/graph.hpp"
#include "bimsgc/losses.hpp"
#include "bimsgc/spectral.hpp"
#include "bimsgc/synth.hpp"

#include <span>
#include <string>
#include <vector>

namespace bimsgc {

/// Moment buffers for a fixed list of parameter tensors (flattened).
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool sgd = false;  // plain theta <- theta - lr * grad
    Index step = 0;
    std::vector<Vector> m;
    std::vector<Vector> v;
};

AdamState make_optimizer(const std::string& kind);

/// One update of every tensor. `lr_scale` (optional, one per tensor) multiplies lr.
/// Throws NumericError naming the step on non-finite gradients.
void adam_step(AdamState& st, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, double lr,
               std::span<const double> lr_scale = {});

struct TrainTrace {
    std::vector<double> loss;
};

struct PhaseResult {
    SyntheticGraph graph;
    TrainTrace trace;
    AdamState optimizer;  // state after the last step
};

/// Everything the phases share: the graph, its spectrum up to the largest
/// synthetic size, and the matching targets.
struct CondenseContext {
    const Graph* g = nullptr;
    SpectralBundle sb;
    TargetStats targets;
};

/// Spectrum with K = round(max_rate * N) (at least 1) and targets.
CondenseContext make_context(const Graph& g, const CondenseConfig& cfg);

LossWeights weights_of(const CondenseConfig& cfg);
MatchOptions match_of(const CondenseConfig& cfg);

/// Initializes a graph with class_balanced_counts(rate) nodes and runs `epochs`
/// steps of total_loss (no mask). Mask logits are never touched.
PhaseResult train_meso(const CondenseContext& ctx, const CondenseConfig& cfg, double rate, int epochs,
                       std::uint64_t seed);
PhaseResult train_meso(const CondenseContext& ctx, const CondenseConfig& cfg, double rate);

/// Continues training an existing graph on total_loss for `epochs` steps.
TrainTrace refine(SyntheticGraph& s, const TargetStats& t, const CondenseConfig& cfg, int epochs,
                  AdamState* state_out = nullptr);

struct DownResult {
    Vector scores;  // keep weights per meso node
    SyntheticGraph graph;
    TrainTrace trace;
    AdamState optimizer;
};

/// Mask learning on a copy of `meso`: scib_loss with theta annealed linearly from
/// cfg.theta to min(target_fraction, 0.99); X'/U' at down_lr_scale * lr.
/// use_ib = false drops the KL term (the large-to-small baseline).
DownResult train_down(const SyntheticGraph& meso, const TargetStats& t, const CondenseConfig& cfg,
                      double target_fraction, bool use_ib = true);

struct UpResult {
    SyntheticGraph large;   // meso rows first
    Vector expansion_mask;  // sigmoid(z) of expansion rows
    TrainTrace trace;
    AdamState optimizer;
};

/// Appends class-mean expansion rows up to `large_counts`, widens the
/// eigenbasis block-diagonally with an orthonormal block on the new rows, and
/// trains e2 epochs of
/// L_total(large, masked) + L_total(meso rows) + beta_ib * mean KL(expansion masks).
/// The meso block (its X' rows, the top-left block of U') takes gradient from
/// the meso term only. Meso rows of X' and meso columns of U' learn at
/// down_lr_scale * lr.
UpResult train_up(const SyntheticGraph& meso, const CondenseContext& ctx, const CondenseConfig& cfg,
                  const std::vector<Index>& large_counts, bool use_ib = true);

struct CandidateScore {
    double fraction = 0.0;
    double rate = 0.0;
    Index n_nodes = 0;
    double informativeness = 0.0;
    double compression = 0.0;
    double objective = 0.0;
    bool failed = false;
    std::string note;
};

struct MesoSelection {
    double fraction = 0.0;
    double rate = 0.0;
    std::vector<CandidateScore> candidates;
};

struct PhaseTiming {
    std::string phase;
    double seconds = 0.0;
};

struct CondenseOutput {
    std::vector<ScaleFamily> families;  // one for bimsgc and the transfer baselines, one per scale for recondense
    std::vector<AdamState> optimizers;  // final optimizer state that produced each family
    MesoSelection selection;
    std::vector<PhaseTiming> timings;
    std::vector<std::pair<std::string, TrainTrace>> traces;
};

/// Spectral, meso selection, meso training, down and up phases.
CondenseOutput run_bimsgc(const Graph& g, const CondenseConfig& cfg);

/// recondense | large_to_small | small_to_large.
CondenseOutput run_baseline(const Graph& g, const CondenseConfig& cfg, const std::string& strategy);

/// Dispatches on cfg.strategy.
CondenseOutput run_strategy(const Graph& g, const CondenseConfig& cfg);

/// Scores of the family: meso scores, then expansion masks times the smallest meso score.
Vector nested_scores(const Vector& meso_scores, const Vector& expansion_mask);

}  // namespace bimsgc
