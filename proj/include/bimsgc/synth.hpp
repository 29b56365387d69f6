#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/graph.hpp"
#include "bimsgc/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bimsgc {

/// Learnable condensed graph. The adjacency is not stored: it is derived from
/// the eigenbasis and the frozen eigenvalue prefix (see reconstruct_adjacency).
///
/// Labels are fixed at initialization and never change. The soft keep-mask is
/// sigmoid(mask_logits).
struct SyntheticGraph {
    Index n_nodes = 0;
    int n_classes = 0;
    Matrix features;           // n_nodes x D
    ColMatrix eigenbasis;      // n_nodes x k_active
    Vector shared_eigenvalues; // k_active, prefix of the original spectrum
    std::vector<int> labels;   // n_nodes
    Vector mask_logits;        // n_nodes
    Index k_active = 0;

    Index feature_dim() const { return features.cols(); }
    Vector mask() const;
    std::vector<Index> class_counts() const;
};

/// Nested multi-scale output: `meso` is the first meso.n_nodes rows of `large`,
/// and node_scores rank nodes for extraction (meso scores dominate expansion ones).
struct ScaleFamily {
    SyntheticGraph meso;
    SyntheticGraph large;
    Vector node_scores;  // length large.n_nodes
    double meso_rate = 0.0;
    double max_rate = 0.0;
    std::string config_digest;
    // Original-graph facts needed to turn a rate into class-balanced counts.
    Index n_original = 0;
    std::vector<Index> original_class_sizes;
};

/// Per-class node counts for a reduction rate relative to the full node count:
/// total = round(rate * n), floor(total / c) each, remainder to the largest
/// classes (ties to the lower class id). Indexed by class.
std::vector<Index> class_balanced_counts(double rate, Index n, int c, const std::vector<Index>& class_sizes);

struct InitOptions {
    double noise_scale = 0.01;  // noise sigma as a fraction of per-feature train std
    double mask_logit = 2.0;
};

/// Class-mean features plus small noise, orthonormal random eigenbasis,
/// labels grouped by class, K_active = node count.
SyntheticGraph init_synthetic(const Graph& g, const std::vector<Index>& counts, const SpectralBundle& sb,
                              std::uint64_t seed, const InitOptions& opts = {});

/// A' = clip_{>=0}(sym(U diag(1 - lambda) U^T)); weighted, self weights kept on the diagonal.
ColMatrix reconstruct_adjacency(const SyntheticGraph& s);

/// a <- max((a + a^T) / 2, 0) in place; a must be square.
void symmetrize_clip(ColMatrix& a);

/// Self-loop-normalized reconstruct_adjacency, the propagation matrix GNNs use on s.
ColMatrix propagation_matrix(const SyntheticGraph& s);

/// Copies rows `nodes` and the first `k` eigenbasis columns / eigenvalues.
SyntheticGraph restrict_synthetic(const SyntheticGraph& s, const std::vector<Index>& nodes, Index k);

enum class ExtractMode { Ranked, Random };

ExtractMode parse_extract_mode(const std::string& name);
std::string to_string(ExtractMode mode);

/// Node indices (into family.large, ascending) for a reduction rate.
std::vector<Index> extraction_nodes(const ScaleFamily& f, double rate, ExtractMode mode, std::uint64_t seed);

/// Frozen condensed graph at `rate`; K_active equals its node count.
SyntheticGraph extract_subgraph(const ScaleFamily& f, double rate, ExtractMode mode, std::uint64_t seed);

/// Orthonormalizes columns in order (modified Gram-Schmidt, two passes).
/// Leading columns that are already orthonormal are left unchanged up to rounding.
ColMatrix orthonormalize_columns(const ColMatrix& m);

}  // namespace bimsgc
