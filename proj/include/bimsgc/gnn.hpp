#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/graph.hpp"
#include "bimsgc/kernels.hpp"
#include "bimsgc/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bimsgc {

enum class Arch { Gcn, Sgc, Mlp, Appnp, ChebNet };

Arch parse_arch(const std::string& name);
std::string to_string(Arch arch);
/// gcn, sgc, mlp, appnp, chebnet
const std::vector<std::string>& all_arch_names();

struct ArchParams {
    double teleport = 0.1;  // appnp
    int appnp_steps = 10;
    int cheb_order = 2;     // terms T_0 .. T_order
};

/// Symmetric, self-loop-normalized propagation matrix, sparse or dense.
class Propagator {
public:
    static Propagator sparse(CsrMatrix normalized);
    static Propagator dense(ColMatrix normalized);
    /// D~^{-1/2}(A + I)D~^{-1/2} of the original graph.
    static Propagator of(const Graph& g);
    /// The same normalization applied to reconstruct_adjacency(s).
    static Propagator of(const SyntheticGraph& s);

    Index size() const { return n_; }
    Matrix apply(const Matrix& h) const;

private:
    Index n_ = 0;
    bool sparse_ = true;
    CsrMatrix csr_;
    ColMatrix dense_;
};

/// Node features, kept in CSR form when mostly zero (bag-of-words inputs).
class FeatureOperand {
public:
    explicit FeatureOperand(const Matrix& x, double max_density = 0.25);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    bool is_sparse() const { return sparse_; }
    Matrix times(const Matrix& w) const;    // X W
    Matrix t_times(const Matrix& g) const;  // X^T G

private:
    Index rows_ = 0, cols_ = 0;
    bool sparse_ = false;
    Matrix dense_;
    CsrMatrix csr_;
};

/// Bias-free models. Weight layout:
///   gcn, mlp, appnp: `depth` matrices D -> hidden -> ... -> C
///   sgc: one D x C matrix, `depth` propagation steps
///   chebnet: depth * (cheb_order + 1) matrices, index l * (cheb_order + 1) + k
struct GnnModel {
    Arch arch = Arch::Gcn;
    Index d_in = 0;
    Index c_out = 0;
    Index hidden = 0;
    int depth = 2;
    ArchParams params;
    std::vector<Matrix> weights;

    Index n_parameters() const;
};

/// Glorot-uniform weights from `seed`.
GnnModel build_model(Arch arch, Index d_in, Index c_out, Index hidden, int depth, std::uint64_t seed,
                     const ArchParams& params = {});

Matrix forward(const GnnModel& m, const Propagator& prop, const FeatureOperand& x);

struct GnnGrad {
    double loss = 0.0;
    std::vector<Matrix> grads;  // same layout as weights
};

/// Mean softmax cross-entropy over `idx` and its gradient for every weight.
GnnGrad cross_entropy_grad(const GnnModel& m, const Propagator& prop, const FeatureOperand& x,
                           const std::vector<int>& labels, const std::vector<Index>& idx);

/// Argmax accuracy over idx; ties go to the lowest class index.
double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<Index>& idx);

struct DataView {
    const Propagator* prop = nullptr;
    const FeatureOperand* x = nullptr;
    const std::vector<int>* labels = nullptr;
    std::vector<Index> idx;
};

double evaluate(const GnnModel& m, const DataView& data);

struct TrainOptions {
    int epochs = 300;
    int patience = 50;  // epochs without validation gain before stopping; 0 never stops early
    double lr = 0.01;
    double weight_decay = 5e-4;  // L2 added to the gradient
};

struct TrainOutcome {
    GnnModel model;  // best-validation snapshot (last epoch when no validation set)
    double best_val_acc = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    double final_loss = 0.0;
};

/// Full-batch Adam on `train`; `val` (may be null or another graph) picks the snapshot.
TrainOutcome train_classifier(GnnModel m, const DataView& train, const DataView* val, const TrainOptions& opts);

/// Central-difference check of cross_entropy_grad on a random instance with at
/// most 8 nodes and no hidden pre-activation within 1e-3 of a ReLU kink. Returns
/// the max relative error, denominator max(|a_i|, |n_i|, 1e-3 max_j |a_j|).
double gnn_finite_diff_check(Arch arch, std::uint64_t seed, double eps, bool flip_gradient_sign = false);

}  // namespace bimsgc
