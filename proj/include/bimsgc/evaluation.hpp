#pragma once

#include "bimsgc/config.hpp"
#include "bimsgc/gnn.hpp"
#include "bimsgc/graph.hpp"
#include "bimsgc/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bimsgc {

/// Loads cfg.dataset and attaches a planetoid split from the config when the
/// directory ships without one.
Graph load_dataset_for(const CondenseConfig& cfg);

/// A condense output directory: manifest.json naming the strategy and one
/// family directory per entry (one per scale for recondense), or a bare family
/// directory holding synth_meta.json.
struct FamilySet {
    std::vector<ScaleFamily> families;
    std::string strategy;

    /// The family that covers `rate`: the one whose max_rate matches it when
    /// there are several (recondense), otherwise the only one.
    const ScaleFamily& for_rate(double rate) const;
};

FamilySet load_family_set(const std::filesystem::path& dir);

struct EvalCell {
    double scale = 0.0;
    std::string arch;
    Index n_nodes = 0;
    std::vector<double> accuracies;  // test accuracy in [0, 1] per trial
    std::vector<std::uint64_t> seeds;

    double mean() const;
    /// Sample standard deviation; NaN with fewer than two trials.
    double stddev() const;
};

struct EvalReport {
    std::string dataset;
    std::string config_digest;
    std::string strategy;
    std::string mode;
    bool ib_on = true;
    std::vector<EvalCell> cells;  // scale-major, archs in request order
    // wall-clock of the condensation phases; markdown only, CSVs stay reproducible
    std::vector<std::pair<std::string, double>> phase_seconds;

    std::string to_csv() const;
    /// Rows are scales (percent), columns archs, "mean ± std" in percent with one decimal.
    std::string to_markdown() const;
};

/// Inverse of EvalReport::to_csv (phase_seconds are not stored there).
EvalReport report_from_csv(const std::string& text);

/// For each (scale, arch, trial): extract, train on the condensed graph, pick
/// the snapshot on the original validation split, score the original test split.
EvalReport evaluate_families(const FamilySet& set, const Graph& g, const std::vector<double>& scales,
                             const EvalConfig& ec, std::uint64_t seed);

/// The same protocol with the original training split in place of a condensed graph.
EvalCell evaluate_whole_graph(const Graph& g, const std::string& arch, const EvalConfig& ec, std::uint64_t seed);

/// Seed of trial t.
std::uint64_t trial_seed(std::uint64_t seed, int trial);

struct MiRow {
    double scale = 0.0;
    Index n_nodes = 0;
    double with_original = 0.0;
    double with_condensed = 0.0;
    bool self = false;  // sub is the whole large graph; with_condensed is the +inf sentinel
};

/// Per scale, KSG estimates of I(repr(sub); repr(G)) and I(repr(sub); repr(large)).
/// Sub rows pair with the same rows of the large graph, and with the class-mean
/// original representation of their label for the original graph.
std::vector<MiRow> mi_diagnostics(const ScaleFamily& f, const Graph& g, const std::vector<double>& scales,
                                  ExtractMode mode, std::uint64_t seed, int hops = 1);

std::string mi_to_csv(const std::vector<MiRow>& rows, const std::string& config_digest);

}  // namespace bimsgc
