#pragma once

#include "bimsgc/graph.hpp"
#include "bimsgc/spectral.hpp"
#include "bimsgc/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace bimsgc::testing {

// Erdos-Renyi graph with Gaussian features (single class).
Graph er_graph(Index n, double p, std::uint64_t seed, Index d = 4);

// Complete graph on n nodes.
Graph complete_graph(Index n);

// n nodes, two classes, each class made of two disjoint copies of a triangle;
// every node of a class carries the same feature vector. All nodes train.
Graph duplicated_clique_fixture();

// Cora-shaped synthetic stand-in: sparse binary bag-of-words features with
// class-dependent vocabularies, SBM-like homophilous edges, planetoid split.
Graph cora_standin(Index n = 2708, int c = 7, Index d = 1433, std::uint64_t seed = 11);

// Random SyntheticGraph with generic entries (no exact zeros, no clip ties).
SyntheticGraph random_synthetic(Index n, Index d, Index k, int c, std::uint64_t seed, double mask_spread = 1.0);

// Targets and bundle for a small random graph matching random_synthetic dims.
struct SmallProblem {
    Graph g;
    SpectralBundle sb;
};
SmallProblem small_problem(Index n, Index d, int c, Index k, std::uint64_t seed);

// Scratch directory under the system temp path, removed on destruction.
struct TempDir {
    explicit TempDir(const std::string& tag);
    ~TempDir();
    std::filesystem::path path;
};

}  // namespace bimsgc::testing
