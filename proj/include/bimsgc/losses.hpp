#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/graph.hpp"
#include "bimsgc/spectral.hpp"
#include "bimsgc/synth.hpp"

namespace bimsgc {

/// Matching targets computed once from the original graph.
///
/// E_i = (X^T u_i)(X^T u_i)^T is stored through its rank-one factor
/// `projections.col(i)` = X^T u_i; e_mat(i) materializes it for inspection.
/// p_mat = X^T Ahat Ybar where Ahat is the self-loop-normalized adjacency and
/// Ybar holds the training one-hot labels with each class column divided by
/// its training count (a class-mean readout that does not scale with N).
struct TargetStats {
    Index k = 0;
    Index n_nodes = 0;      // original node count
    ColMatrix projections;  // D x k
    ColMatrix p_mat;        // D x C

    ColMatrix e_mat(Index i) const { return projections.col(i) * projections.col(i).transpose(); }
};

TargetStats target_stats(const Graph& g, const SpectralBundle& sb);

/// Value plus analytic gradients with respect to every learnable of a SyntheticGraph.
struct LossValueGrad {
    double value = 0.0;
    Matrix grad_features;     // N' x D
    ColMatrix grad_eigenbasis;  // N' x K_active
    Vector grad_mask_logits;  // N' (zero when no mask is applied)

    static LossValueGrad zeros_like(const SyntheticGraph& s);
    LossValueGrad& add_scaled(const LossValueGrad& other, double w);
};

struct LossWeights {
    double alpha = 1.0;   // eigenbasis term
    double beta_d = 1.0;  // discriminative term
    double gamma = 1.0;   // orthogonality term
};

struct MatchOptions {
    // Scale E_i targets by N'/N. A unit eigenvector spread over N nodes makes
    // ||X^T u|| grow like sqrt(N); without the ratio a condensed graph can only
    // match by inflating its features. With N' = N this is the identity.
    bool size_normalized = true;
};

/// L_e = sum_i ||E_i - Xt^T u'_i u'_i^T Xt||_F^2 / (K D^2), Xt = diag(mask) X' when a
/// mask is given. Mask gradients are returned with respect to the logits,
/// i.e. dL/dm * m (1 - m) computed from the supplied mask values.
LossValueGrad eigenbasis_loss(const SyntheticGraph& s, const TargetStats& t, const Vector* mask = nullptr,
                              const MatchOptions& opts = {});

/// L_d = ||P - Xt^T Ahat' Ybar'||_F^2 / (D C), Ahat' the self-loop-normalized
/// reconstruct_adjacency(s). Gradients flow through X' and U'.
LossValueGrad discriminative_loss(const SyntheticGraph& s, const TargetStats& t, const Vector* mask = nullptr);

/// L_o = ||U'^T U' - I||_F^2.
LossValueGrad orthogonality_loss(const SyntheticGraph& s);

LossValueGrad total_loss(const SyntheticGraph& s, const TargetStats& t, const LossWeights& w,
                         const Vector* mask = nullptr, const MatchOptions& opts = {});

/// KL(Bern(m_i) || Bern(theta)) for logits z_i, computed stably.
double bernoulli_kl(double logit, double theta);

/// beta / |nodes| * sum_{i in nodes} KL(Bern(sigmoid(z_i)) || Bern(theta)); adds
/// its gradient into `grad_logits`. Returns the term value.
double bernoulli_kl_term(const Vector& logits, const std::vector<Index>& nodes, double theta, double beta,
                         Vector& grad_logits);

/// Minimization form of the subgraph-condensation IB objective:
/// total_loss(s masked by sigmoid(z)) + beta_ib * mean_i KL(Bern(m_i) || Bern(theta)).
LossValueGrad scib_loss(const SyntheticGraph& s, const TargetStats& t, double theta, double beta_ib,
                        const LossWeights& w, const MatchOptions& opts = {});

/// ||dL_total/dx'_i||_2 per node.
Vector node_importance(const LossValueGrad& g);

enum class LossKind { Eigenbasis, EigenbasisMasked, Discriminative, DiscriminativeMasked, Orthogonality, Total, Scib };

std::string to_string(LossKind kind);

struct GradCheckParams {
    LossWeights weights;
    MatchOptions match;
    double theta = 0.5;
    double beta_ib = 0.1;
    bool flip_gradient_sign = false;  // fault injection for harness self-tests
};

/// Evaluates one of the losses above (masked variants use sigmoid(mask_logits)).
LossValueGrad evaluate_loss(LossKind kind, const SyntheticGraph& s, const TargetStats& t,
                            const GradCheckParams& p = {});

/// Central differences over every coordinate of X', U' and z. Returns the max
/// relative error, denominator max(|a_i|, |n_i|, 1e-3 max_j |a_j|) so coordinates
/// far below the gradient scale are judged at that scale.
double finite_diff_check(LossKind kind, const SyntheticGraph& s, const TargetStats& t, double eps,
                         const GradCheckParams& p = {});

}  // namespace bimsgc
