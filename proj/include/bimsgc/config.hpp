#pragma once

#include "bimsgc/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bimsgc {

/// Settings for training and scoring GNNs on condensed graphs.
struct EvalConfig {
    std::vector<std::string> archs{"gcn"};
    int trials = 5;
    std::string mode = "random";  // ranked | random
    int hidden = 256;
    int depth = 2;
    int epochs = 300;
    int patience = 50;
    int full_epochs = 2000;
    bool full = false;  // use full_epochs and no early stopping
    double lr = 0.01;
    double weight_decay = 5e-4;
    int cheb_order = 2;
};

/// Everything a condensation run depends on. Serialized to JSON; the digest of
/// that serialization identifies the run in every artifact.
struct CondenseConfig {
    std::string dataset;  // dataset directory; not part of the digest
    std::vector<double> scales{0.005, 0.01, 0.015, 0.02};
    std::vector<double> meso_candidates{0.2, 0.5, 0.8};  // fractions of the max scale
    double alpha = 1.0;
    double beta_d = 1.0;
    double gamma = 1.0;
    double beta_ib = 0.1;
    double theta = 0.5;
    double lr = 1e-4;
    int e1 = 500;
    int e2 = 500;
    int e_down = 50;
    int probe_epochs = 100;
    std::uint64_t seed = 0;
    std::string optimizer = "adam";  // adam | sgd
    std::string k_policy = "node_count";
    std::string strategy = "bimsgc";  // bimsgc | recondense | large_to_small | small_to_large
    double spectral_tol = 1e-8;
    bool size_normalized = true;
    double init_noise = 0.01;
    double init_logit = 2.0;
    double down_lr_scale = 0.1;
    // applied only when the dataset ships without splits.json
    int per_class_train = 20;
    int n_val = 500;
    int n_test = 1000;
    EvalConfig eval;

    double max_rate() const;
    double min_rate() const;
};

/// Throws ParameterError naming the first invalid field.
void validate(const CondenseConfig& cfg);

nlohmann::json to_json(const CondenseConfig& cfg);

/// Missing fields keep their defaults; unknown fields are rejected. `source`
/// prefixes error messages.
CondenseConfig config_from_json(const nlohmann::json& j, const std::string& source = "config");

/// Parses and validates a JSON file; syntax errors report line and column.
CondenseConfig load_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a 64 over the canonical JSON of the condensation
/// settings (everything but `dataset` and `eval`).
std::string config_digest(const CondenseConfig& cfg);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace bimsgc
