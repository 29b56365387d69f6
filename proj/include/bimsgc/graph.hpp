#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/kernels.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace bimsgc {

struct Splits {
    std::vector<Index> train;
    std::vector<Index> val;
    std::vector<Index> test;

    bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

/// Node-classification dataset: features, undirected 0/1 adjacency, labels, splits.
///
/// Invariants (checked by validate()):
///  - adjacency is symmetric with an empty diagonal;
///  - labels lie in [0, n_classes);
///  - splits are pairwise-disjoint subsets of [0, n_nodes), and when a train
///    split is present every class has at least one training node.
///
/// Immutable after construction in practice; safe to share across threads.
struct Graph {
    Index n_nodes = 0;
    int n_classes = 0;
    Matrix features;          // n_nodes x feature_dim
    CsrMatrix adjacency;      // symmetric, values 1.0
    std::vector<int> labels;  // length n_nodes
    Splits splits;

    Index feature_dim() const { return features.cols(); }
    Index n_edges() const { return adjacency.nnz() / 2; }
    std::vector<Index> class_sizes() const;

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;
};

/// Counters from load_dataset for rows that were repaired rather than rejected.
struct LoadStats {
    Index edge_rows = 0;
    Index self_loops_dropped = 0;
    Index duplicates_dropped = 0;
};

/// Reads a dataset directory (meta.json, edges.csv, features.csv|features.bin,
/// labels.csv, optional splits.json). Throws LoadError for missing/unreadable
/// files and ValidationError for bad content, naming the offending row.
Graph load_dataset(const std::filesystem::path& dir, LoadStats* stats = nullptr);

/// Writes `g` in the same directory format (features.csv, full precision).
void save_dataset(const Graph& g, const std::filesystem::path& dir);

/// Builds a graph from an undirected edge list; pairs are canonicalized to
/// (min, max), self loops and duplicates dropped.
CsrMatrix adjacency_from_edges(Index n_nodes, const std::vector<std::pair<Index, Index>>& edges,
                               LoadStats* stats = nullptr);

/// Stochastic block model with contiguous, size-balanced class blocks and
/// class-conditional Gaussian features (unit noise, mean offset 1 along axis
/// class % d). Pure function of its arguments. No splits are attached.
Graph generate_sbm(Index n, int c, double p_in, double p_out, Index d, std::uint64_t seed);

/// Class-balanced planetoid-style split: `per_class_train` nodes per class,
/// then `n_val` and `n_test` from the shuffled remainder. Returns a copy of `g`
/// carrying the new splits.
Graph split_planetoid(const Graph& g, Index per_class_train, Index n_val, Index n_test,
                      std::uint64_t seed);

}  // namespace bimsgc
