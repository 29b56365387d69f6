#include "bimsgc/gnn.hpp"

#include "bimsgc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>

namespace bimsgc {

Arch parse_arch(const std::string& name) {
    if (name == "gcn") return Arch::Gcn;
    if (name == "sgc") return Arch::Sgc;
    if (name == "mlp") return Arch::Mlp;
    if (name == "appnp") return Arch::Appnp;
    if (name == "chebnet") return Arch::ChebNet;
    throw ParameterError("unknown architecture '" + name + "' (expected gcn|sgc|mlp|appnp|chebnet)");
}

std::string to_string(Arch arch) {
    switch (arch) {
        case Arch::Gcn: return "gcn";
        case Arch::Sgc: return "sgc";
        case Arch::Mlp: return "mlp";
        case Arch::Appnp: return "appnp";
        case Arch::ChebNet: return "chebnet";
    }
    return "?";
}

const std::vector<std::string>& all_arch_names() {
    static const std::vector<std::string> names{"gcn", "sgc", "mlp", "appnp", "chebnet"};
    return names;
}

Propagator Propagator::sparse(CsrMatrix normalized) {
    if (normalized.rows != normalized.cols) throw DimensionError("Propagator: matrix must be square");
    Propagator p;
    p.n_ = normalized.rows;
    p.sparse_ = true;
    p.csr_ = std::move(normalized);
    return p;
}

Propagator Propagator::dense(ColMatrix normalized) {
    if (normalized.rows() != normalized.cols()) throw DimensionError("Propagator: matrix must be square");
    Propagator p;
    p.n_ = normalized.rows();
    p.sparse_ = false;
    p.dense_ = std::move(normalized);
    return p;
}

Propagator Propagator::of(const Graph& g) { return sparse(normalize_with_self_loops(g.adjacency)); }

Propagator Propagator::of(const SyntheticGraph& s) { return dense(propagation_matrix(s)); }

Matrix Propagator::apply(const Matrix& h) const {
    if (h.rows() != n_) throw DimensionError("Propagator: operand has " + std::to_string(h.rows()) + " rows, expected " +
                                             std::to_string(n_));
    if (sparse_) return kernels::spmm(csr_, h);
    return Matrix(dense_ * h);
}

FeatureOperand::FeatureOperand(const Matrix& x, double max_density) : rows_(x.rows()), cols_(x.cols()) {
    Index nnz = 0;
    for (Index i = 0; i < x.size(); ++i) nnz += x.data()[i] != 0.0 ? 1 : 0;
    sparse_ = x.size() > 0 && static_cast<double>(nnz) <= max_density * static_cast<double>(x.size());
    if (!sparse_) {
        dense_ = x;
        return;
    }
    csr_.rows = rows_;
    csr_.cols = cols_;
    csr_.row_ptr.assign(1, 0);
    csr_.col_idx.reserve(static_cast<size_t>(nnz));
    csr_.values.reserve(static_cast<size_t>(nnz));
    for (Index r = 0; r < rows_; ++r) {
        for (Index c = 0; c < cols_; ++c)
            if (x(r, c) != 0.0) {
                csr_.col_idx.push_back(c);
                csr_.values.push_back(x(r, c));
            }
        csr_.row_ptr.push_back(static_cast<Index>(csr_.col_idx.size()));
    }
}

Matrix FeatureOperand::times(const Matrix& w) const {
    if (w.rows() != cols_) throw DimensionError("FeatureOperand: weight rows differ from feature width");
    if (!sparse_) return dense_ * w;
    return kernels::spmm(csr_, w);
}

Matrix FeatureOperand::t_times(const Matrix& g) const {
    if (g.rows() != rows_) throw DimensionError("FeatureOperand: gradient rows differ from node count");
    if (!sparse_) return dense_.transpose() * g;
    Matrix out = Matrix::Zero(cols_, g.cols());
    for (Index r = 0; r < rows_; ++r)
        for (Index p = csr_.row_ptr[r]; p < csr_.row_ptr[r + 1]; ++p)
            out.row(csr_.col_idx[p]) += csr_.values[p] * g.row(r);
    return out;
}

Index GnnModel::n_parameters() const {
    Index n = 0;
    for (const auto& w : weights) n += w.size();
    return n;
}

GnnModel build_model(Arch arch, Index d_in, Index c_out, Index hidden, int depth, std::uint64_t seed,
                     const ArchParams& params) {
    if (d_in < 1 || c_out < 1 || hidden < 1) throw ParameterError("build_model: dimensions must be >= 1");
    if (depth < (arch == Arch::Sgc ? 0 : 1)) throw ParameterError("build_model: depth too small for " + to_string(arch));
    if (params.cheb_order < 0 || params.appnp_steps < 0 || params.teleport < 0.0 || params.teleport > 1.0)
        throw ParameterError("build_model: invalid architecture parameters");
    GnnModel m;
    m.arch = arch;
    m.d_in = d_in;
    m.c_out = c_out;
    m.hidden = hidden;
    m.depth = depth;
    m.params = params;

    std::mt19937_64 rng(seed);
    auto glorot = [&](Index in, Index out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        Matrix w(in, out);
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
        return w;
    };
    auto layer_in = [&](int l) { return l == 0 ? d_in : hidden; };
    auto layer_out = [&](int l) { return l == depth - 1 ? c_out : hidden; };

    if (arch == Arch::Sgc) {
        m.weights.push_back(glorot(d_in, c_out));
    } else if (arch == Arch::ChebNet) {
        for (int l = 0; l < depth; ++l)
            for (int k = 0; k <= params.cheb_order; ++k) m.weights.push_back(glorot(layer_in(l), layer_out(l)));
    } else {
        for (int l = 0; l < depth; ++l) m.weights.push_back(glorot(layer_in(l), layer_out(l)));
    }
    return m;
}

namespace {

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

// Intermediate values kept for the backward pass.
struct Tape {
    std::vector<Matrix> inputs;  // H_l for l >= 1
    std::vector<Matrix> pre;     // pre-activation Z_l
    Matrix stack_out;            // appnp: MLP logits before propagation
};

Matrix layer_times(const Tape& t, const FeatureOperand& x, int l, const Matrix& w) {
    return l == 0 ? x.times(w) : Matrix(t.inputs[l - 1] * w);
}

Matrix layer_t_times(const Tape& t, const FeatureOperand& x, int l, const Matrix& g) {
    return l == 0 ? x.t_times(g) : Matrix(t.inputs[l - 1].transpose() * g);
}

// T_k(-A) y for k = 0..order.
std::vector<Matrix> cheb_terms(const Propagator& prop, const Matrix& y, int order) {
    std::vector<Matrix> t;
    t.push_back(y);
    if (order >= 1) t.push_back(-prop.apply(y));
    for (int k = 2; k <= order; ++k) t.push_back(-2.0 * prop.apply(t[k - 1]) - t[k - 2]);
    return t;
}

Matrix cheb_apply(const Propagator& prop, const Matrix& y, int k) { return cheb_terms(prop, y, k).back(); }

Matrix stack_forward(const GnnModel& m, const Propagator& prop, const FeatureOperand& x, bool propagate, Tape& t) {
    Matrix z;
    for (int l = 0; l < m.depth; ++l) {
        Matrix y = layer_times(t, x, l, m.weights[l]);
        z = propagate ? prop.apply(y) : y;
        t.pre.push_back(z);
        if (l < m.depth - 1) t.inputs.push_back(relu(z));
    }
    return z;
}

void stack_backward(const GnnModel& m, const Propagator& prop, const FeatureOperand& x, bool propagate,
                    const Tape& t, Matrix g, std::vector<Matrix>& grads) {
    for (int l = m.depth - 1; l >= 0; --l) {
        if (l < m.depth - 1) g = g.cwiseProduct((t.pre[l].array() > 0.0).cast<double>().matrix());
        Matrix gp = propagate ? prop.apply(g) : g;
        grads[l] = layer_t_times(t, x, l, gp);
        if (l > 0) g = gp * m.weights[l].transpose();
    }
}

Matrix forward_tape(const GnnModel& m, const Propagator& prop, const FeatureOperand& x, Tape& t) {
    if (x.cols() != m.d_in) throw DimensionError("forward: feature width differs from the model input");
    if (m.arch != Arch::Mlp && prop.size() != x.rows())
        throw DimensionError("forward: propagator and features disagree on node count");
    switch (m.arch) {
        case Arch::Gcn: return stack_forward(m, prop, x, true, t);
        case Arch::Mlp: return stack_forward(m, prop, x, false, t);
        case Arch::Sgc: {
            Matrix z = x.times(m.weights[0]);
            for (int s = 0; s < m.depth; ++s) z = prop.apply(z);
            return z;
        }
        case Arch::Appnp: {
            t.stack_out = stack_forward(m, prop, x, false, t);
            const double a = m.params.teleport;
            Matrix z = t.stack_out;
            for (int s = 0; s < m.params.appnp_steps; ++s) z = (1.0 - a) * prop.apply(z) + a * t.stack_out;
            return z;
        }
        case Arch::ChebNet: {
            const int terms = m.params.cheb_order + 1;
            Matrix z;
            for (int l = 0; l < m.depth; ++l) {
                z = Matrix::Zero(x.rows(), m.weights[l * terms].cols());
                for (int k = 0; k < terms; ++k) z += cheb_apply(prop, layer_times(t, x, l, m.weights[l * terms + k]), k);
                t.pre.push_back(z);
                if (l < m.depth - 1) t.inputs.push_back(relu(z));
            }
            return z;
        }
    }
    throw ParameterError("forward: unknown architecture");
}

std::vector<Matrix> backward_tape(const GnnModel& m, const Propagator& prop, const FeatureOperand& x, const Tape& t,
                                  const Matrix& g_out) {
    std::vector<Matrix> grads(m.weights.size());
    switch (m.arch) {
        case Arch::Gcn: stack_backward(m, prop, x, true, t, g_out, grads); break;
        case Arch::Mlp: stack_backward(m, prop, x, false, t, g_out, grads); break;
        case Arch::Sgc: {
            Matrix g = g_out;
            for (int s = 0; s < m.depth; ++s) g = prop.apply(g);
            grads[0] = x.t_times(g);
            break;
        }
        case Arch::Appnp: {
            const double a = m.params.teleport;
            Matrix g = g_out;
            Matrix g_h = Matrix::Zero(g.rows(), g.cols());
            for (int s = m.params.appnp_steps; s >= 1; --s) {
                g_h += a * g;
                g = (1.0 - a) * prop.apply(g);
            }
            g_h += g;
            stack_backward(m, prop, x, false, t, g_h, grads);
            break;
        }
        case Arch::ChebNet: {
            const int terms = m.params.cheb_order + 1;
            Matrix g = g_out;
            for (int l = m.depth - 1; l >= 0; --l) {
                if (l < m.depth - 1) g = g.cwiseProduct((t.pre[l].array() > 0.0).cast<double>().matrix());
                std::vector<Matrix> tg = cheb_terms(prop, g, m.params.cheb_order);
                Matrix g_in;
                for (int k = 0; k < terms; ++k) {
                    grads[l * terms + k] = layer_t_times(t, x, l, tg[k]);
                    if (l > 0) {
                        Matrix part = tg[k] * m.weights[l * terms + k].transpose();
                        g_in = k == 0 ? part : Matrix(g_in + part);
                    }
                }
                if (l > 0) g = g_in;
            }
            break;
        }
    }
    return grads;
}

}  // namespace

Matrix forward(const GnnModel& m, const Propagator& prop, const FeatureOperand& x) {
    Tape t;
    return forward_tape(m, prop, x, t);
}

GnnGrad cross_entropy_grad(const GnnModel& m, const Propagator& prop, const FeatureOperand& x,
                           const std::vector<int>& labels, const std::vector<Index>& idx) {
    if (idx.empty()) throw ParameterError("cross_entropy_grad: empty index set");
    Tape t;
    Matrix z = forward_tape(m, prop, x, t);
    Matrix g = Matrix::Zero(z.rows(), z.cols());
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (Index i : idx) {
        auto row = z.row(i);
        const double mx = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
        const double sum = e.sum();
        loss -= (row(labels[i]) - mx - std::log(sum)) * inv;
        g.row(i) = e / sum * inv;
        g(i, labels[i]) -= inv;
    }
    GnnGrad out;
    out.loss = loss;
    out.grads = backward_tape(m, prop, x, t, g);
    return out;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<Index>& idx) {
    if (idx.empty()) throw ParameterError("accuracy: empty index set");
    Index hit = 0;
    for (Index i : idx) {
        Index best = 0;
        for (Index c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        hit += best == labels[i] ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

double evaluate(const GnnModel& m, const DataView& data) {
    return accuracy(forward(m, *data.prop, *data.x), *data.labels, data.idx);
}

TrainOutcome train_classifier(GnnModel m, const DataView& train, const DataView* val, const TrainOptions& opts) {
    if (train.idx.empty()) throw ParameterError("train_classifier: empty training index set");
    TrainOutcome out;
    const bool use_val = val != nullptr && !val->idx.empty();
    out.model = m;
    out.best_val_acc = use_val ? evaluate(m, *val) : 0.0;
    AdamState st = make_optimizer("adam");
    int since_best = 0;
    for (int e = 1; e <= opts.epochs; ++e) {
        GnnGrad gg = cross_entropy_grad(m, *train.prop, *train.x, *train.labels, train.idx);
        if (!std::isfinite(gg.loss)) throw NumericError("train_classifier: non-finite loss at epoch " + std::to_string(e));
        out.final_loss = gg.loss;
        std::vector<std::span<double>> params;
        std::vector<std::span<const double>> grads;
        for (size_t i = 0; i < m.weights.size(); ++i) {
            if (opts.weight_decay > 0.0) gg.grads[i] += opts.weight_decay * m.weights[i];
            params.emplace_back(m.weights[i].data(), static_cast<size_t>(m.weights[i].size()));
            grads.emplace_back(gg.grads[i].data(), static_cast<size_t>(gg.grads[i].size()));
        }
        adam_step(st, params, grads, opts.lr);
        out.epochs_run = e;
        if (!use_val) continue;
        const double acc = evaluate(m, *val);
        if (acc > out.best_val_acc) {
            out.best_val_acc = acc;
            out.best_epoch = e;
            out.model = m;
            since_best = 0;
        } else if (opts.patience > 0 && ++since_best >= opts.patience) {
            break;
        }
    }
    if (!use_val) {
        out.model = m;
        out.best_epoch = out.epochs_run;
    }
    return out;
}

double gnn_finite_diff_check(Arch arch, std::uint64_t seed, double eps, bool flip_gradient_sign) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ParameterError("gnn_finite_diff_check: eps must lie in [1e-7, 1e-3]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    const Index n = 7, d = 5, c = 3;
    // weighted dense graph: a ring plus random chords
    ColMatrix a = ColMatrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        Index j = (i + 1) % n;
        a(i, j) = a(j, i) = u(rng);
    }
    a(0, 3) = a(3, 0) = u(rng);
    a(2, 5) = a(5, 2) = u(rng);
    ColMatrix at = a + ColMatrix::Identity(n, n);
    Vector isq = at.rowwise().sum().cwiseSqrt().cwiseInverse();
    Propagator prop = Propagator::dense(isq.asDiagonal() * at * isq.asDiagonal());
    Matrix xm(n, d);
    for (Index i = 0; i < xm.size(); ++i) xm.data()[i] = nd(rng);
    FeatureOperand x(xm);
    std::vector<int> labels;
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(i % c));
    std::vector<Index> idx{0, 1, 2, 4, 5, 6};

    ArchParams params;
    params.appnp_steps = 3;
    // FD is meaningless across a ReLU kink: redraw weights until every hidden
    // pre-activation is at least 1e-3 away from zero
    GnnModel m;
    for (std::uint64_t attempt = 0;; ++attempt) {
        m = build_model(arch, d, c, 4, 2, seed + 1 + 7919 * attempt, params);
        for (auto& w : m.weights) w *= 2.0;
        Tape t;
        forward_tape(m, prop, x, t);
        double margin = std::numeric_limits<double>::infinity();
        for (size_t l = 0; l + 1 < t.pre.size(); ++l) margin = std::min(margin, t.pre[l].cwiseAbs().minCoeff());
        if (margin >= 1e-3) break;
        if (attempt == 100) throw NumericError("gnn_finite_diff_check: no kink-free instance found");
    }
    GnnGrad g = cross_entropy_grad(m, prop, x, labels, idx);
    double largest = 0.0;
    for (const auto& gt : g.grads) largest = std::max(largest, gt.cwiseAbs().maxCoeff());
    const double floor = std::max(1e-3 * largest, 1e-12);
    double worst = 0.0;
    for (size_t t = 0; t < m.weights.size(); ++t) {
        for (Index i = 0; i < m.weights[t].size(); ++i) {
            GnnModel p = m, q = m;
            p.weights[t].data()[i] += eps;
            q.weights[t].data()[i] -= eps;
            const double num = (cross_entropy_grad(p, prop, x, labels, idx).loss -
                                cross_entropy_grad(q, prop, x, labels, idx).loss) /
                               (2.0 * eps);
            const double ana = (flip_gradient_sign ? -1.0 : 1.0) * g.grads[t].data()[i];
            worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor}));
        }
    }
    return worst;
}

}  // namespace bimsgc
