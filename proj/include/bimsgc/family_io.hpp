#pragma once

#include "bimsgc/optimize.hpp"
#include "bimsgc/synth.hpp"

#include <filesystem>

namespace bimsgc {

/// Writes the large graph of `f` in dataset form (meta.json, edges.csv with the
/// nonzero pattern of A', features.csv, labels.csv, splits.json with every node
/// in train) plus synth_meta.json, eigenbasis.csv and edges_weighted.csv.
void save_family(const ScaleFamily& f, const std::filesystem::path& dir);

/// Inverse of save_family; features, eigenbasis and scores round-trip exactly.
/// Throws LoadError for missing files.
ScaleFamily load_family(const std::filesystem::path& dir);

/// "src,dst,weight" for every nonzero off-diagonal entry of A' with src < dst.
void write_weighted_edges(const SyntheticGraph& s, const std::filesystem::path& file);

/// Binary optimizer state: "BIMS1" magic, then little-endian fields.
void save_optimizer_state(const AdamState& st, const std::filesystem::path& file);
AdamState load_optimizer_state(const std::filesystem::path& file);

}  // namespace bimsgc
