#pragma once

#include "bimsgc/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bimsgc {

struct GradCheckOptions {
    std::vector<double> eps{1e-4, 1e-5, 1e-6};
    double pass_eps = 1e-5;  // the eps whose error decides pass/fail
    double tolerance = 1e-5;
    int instances = 3;        // random instances per loss
    std::string inject_fault; // loss or arch name whose gradient sign is flipped
};

struct GradCheckRow {
    std::string suite;  // loss | gnn
    std::string name;
    double eps = 0.0;
    double max_rel_error = 0.0;  // worst over instances
};

struct GradCheckReport {
    std::vector<GradCheckRow> rows;
    std::vector<std::string> failures;  // names above tolerance at pass_eps
    bool passed() const { return failures.empty(); }
    /// Worst error over every suite at one eps.
    double worst_at(double eps) const;
    std::string to_csv() const;
};

/// Finite-difference check of every loss (N' <= 10, D <= 6, K <= 5) and every
/// GNN backprop at each eps in opts.eps.
GradCheckReport run_gradcheck(std::uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace bimsgc
