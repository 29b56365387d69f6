#include "bimsgc/losses.hpp"

#include <algorithm>
#include <cmath>

namespace bimsgc {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

void check_shapes(const SyntheticGraph& s, const TargetStats& t) {
    if (s.k_active > t.k)
        throw DimensionError("k_active " + std::to_string(s.k_active) + " exceeds target eigenpairs " + std::to_string(t.k));
    if (s.feature_dim() != t.projections.rows())
        throw DimensionError("feature dim " + std::to_string(s.feature_dim()) + " differs from target " +
                             std::to_string(t.projections.rows()));
    if (s.eigenbasis.rows() != s.n_nodes || s.eigenbasis.cols() != s.k_active)
        throw DimensionError("eigenbasis must be n_nodes x k_active");
    if (s.features.rows() != s.n_nodes) throw DimensionError("features must have one row per node");
}

Matrix masked_features(const SyntheticGraph& s, const Vector* mask) {
    if (!mask) return s.features;
    if (mask->size() != s.n_nodes) throw DimensionError("mask length differs from node count");
    return mask->asDiagonal() * s.features;
}

// Pulls dL/dXt back through Xt = diag(m) X'.
void apply_mask_chain(const SyntheticGraph& s, const Vector* mask, const Matrix& grad_xt, LossValueGrad& out) {
    if (!mask) {
        out.grad_features = grad_xt;
        return;
    }
    out.grad_features = mask->asDiagonal() * grad_xt;
    for (Index i = 0; i < s.n_nodes; ++i) {
        double m = (*mask)(i);
        double dm = s.features.row(i).dot(grad_xt.row(i));
        out.grad_mask_logits(i) = dm * m * (1.0 - m);
    }
}

}  // namespace

TargetStats target_stats(const Graph& g, const SpectralBundle& sb) {
    if (sb.eigenvectors.rows() != g.n_nodes) throw DimensionError("target_stats: bundle does not belong to graph");
    TargetStats t;
    t.k = sb.k;
    t.n_nodes = g.n_nodes;
    t.projections = g.features.transpose() * sb.eigenvectors;

    CsrMatrix ahat = normalize_with_self_loops(g.adjacency);
    Matrix ax = kernels::spmm(ahat, g.features);
    // training nodes define the label readout; without splits every node counts
    std::vector<Index> nodes = g.splits.train;
    if (nodes.empty())
        for (Index v = 0; v < g.n_nodes; ++v) nodes.push_back(v);
    std::vector<double> count(static_cast<size_t>(g.n_classes), 0.0);
    for (Index v : nodes) count[g.labels[v]] += 1.0;
    t.p_mat = ColMatrix::Zero(g.feature_dim(), g.n_classes);
    for (Index v : nodes) t.p_mat.col(g.labels[v]) += ax.row(v).transpose() / count[g.labels[v]];
    return t;
}

LossValueGrad LossValueGrad::zeros_like(const SyntheticGraph& s) {
    LossValueGrad g;
    g.grad_features = Matrix::Zero(s.n_nodes, s.feature_dim());
    g.grad_eigenbasis = ColMatrix::Zero(s.n_nodes, s.k_active);
    g.grad_mask_logits = Vector::Zero(s.n_nodes);
    return g;
}

LossValueGrad& LossValueGrad::add_scaled(const LossValueGrad& other, double w) {
    value += w * other.value;
    grad_features += w * other.grad_features;
    grad_eigenbasis += w * other.grad_eigenbasis;
    grad_mask_logits += w * other.grad_mask_logits;
    return *this;
}

LossValueGrad eigenbasis_loss(const SyntheticGraph& s, const TargetStats& t, const Vector* mask,
                              const MatchOptions& opts) {
    check_shapes(s, t);
    const Index k = s.k_active;
    const Index d = s.feature_dim();
    LossValueGrad out = LossValueGrad::zeros_like(s);
    if (k == 0) return out;

    Matrix xt = masked_features(s, mask);
    ColMatrix w = xt.transpose() * s.eigenbasis;  // D x K, column i = Xt^T u'_i
    const double rho = opts.size_normalized ? static_cast<double>(s.n_nodes) / static_cast<double>(t.n_nodes) : 1.0;
    const double root = std::sqrt(rho);
    const double scale = 1.0 / (static_cast<double>(k) * static_cast<double>(d) * static_cast<double>(d));

    // ||a a^T - w w^T||_F^2 = |a|^4 - 2 (a.w)^2 + |w|^4
    ColMatrix gw(d, k);
    double total = 0.0;
    for (Index i = 0; i < k; ++i) {
        Vector a = root * t.projections.col(i);
        auto wi = w.col(i);
        double aa = a.squaredNorm();
        double ab = a.dot(wi);
        double ww = wi.squaredNorm();
        total += aa * aa - 2.0 * ab * ab + ww * ww;
        gw.col(i) = scale * (-4.0 * ab * a + 4.0 * ww * wi);
    }
    out.value = scale * total;
    Matrix grad_xt = s.eigenbasis * gw.transpose();
    out.grad_eigenbasis = xt * gw;
    apply_mask_chain(s, mask, grad_xt, out);
    return out;
}

LossValueGrad discriminative_loss(const SyntheticGraph& s, const TargetStats& t, const Vector* mask) {
    check_shapes(s, t);
    if (t.p_mat.cols() != s.n_classes) throw DimensionError("discriminative_loss: class count differs from target");
    const Index n = s.n_nodes;
    const Index d = s.feature_dim();
    const int c = s.n_classes;
    LossValueGrad out = LossValueGrad::zeros_like(s);

    // Two N' x N' buffers: nrm (normalized adjacency) and gs (gradient on the
    // clipped entries). dL/dnrm = (Xt gq) Yn^T has rank C and is never formed.
    const Vector weight = Vector::Ones(s.k_active) - s.shared_eigenvalues;
    const ColMatrix uw = s.eigenbasis * weight.asDiagonal();
    ColMatrix nrm = uw * s.eigenbasis.transpose();
    symmetrize_clip(nrm);
    std::vector<char> diag_kept(static_cast<size_t>(n));
    for (Index j = 0; j < n; ++j) {
        diag_kept[j] = nrm(j, j) > 0.0;
        nrm(j, j) += 1.0;
    }
    const Vector deg = nrm.colwise().sum().transpose();
    const Vector isq = deg.cwiseSqrt().cwiseInverse();
    for (Index j = 0; j < n; ++j) nrm.col(j) = nrm.col(j).cwiseProduct(isq) * isq(j);

    auto counts = s.class_counts();
    ColMatrix yn = ColMatrix::Zero(n, c);
    for (Index i = 0; i < n; ++i) yn(i, s.labels[i]) = 1.0 / static_cast<double>(counts[s.labels[i]]);

    Matrix xt = masked_features(s, mask);
    ColMatrix ny = nrm * yn;                   // N' x C
    ColMatrix r = xt.transpose() * ny - t.p_mat;  // D x C
    const double scale = 1.0 / (static_cast<double>(d) * c);
    out.value = scale * r.squaredNorm();

    ColMatrix gq = 2.0 * scale * r;
    Matrix grad_xt = ny * gq.transpose();
    const ColMatrix p = xt * gq;  // dL/dnrm = p yn^T
    const ColMatrix np = nrm * p;

    // nrm = diag(isq) at diag(isq), isq = deg^-1/2, deg = rowsum(at)
    Vector gd(n);
    for (Index k = 0; k < n; ++k) gd(k) = -0.5 * (p.row(k).dot(ny.row(k)) + yn.row(k).dot(np.row(k))) / deg(k);
    const ColMatrix ip = isq.asDiagonal() * p;
    ColMatrix gs(n, n);
    for (Index j = 0; j < n; ++j) {
        const int cj = s.labels[j];
        const double yj = yn(j, cj) * isq(j);
        gs.col(j) = (nrm.col(j).array() > 0.0).select(ip.col(cj).array() * yj + gd.array(), 0.0);
        if (!diag_kept[j]) gs(j, j) = 0.0;
    }
    out.grad_eigenbasis.noalias() = gs * uw;
    out.grad_eigenbasis.noalias() += gs.transpose() * uw;
    apply_mask_chain(s, mask, grad_xt, out);
    return out;
}

LossValueGrad orthogonality_loss(const SyntheticGraph& s) {
    LossValueGrad out = LossValueGrad::zeros_like(s);
    const ColMatrix& u = s.eigenbasis;
    ColMatrix m = u.transpose() * u - ColMatrix::Identity(u.cols(), u.cols());
    out.value = m.squaredNorm();
    out.grad_eigenbasis = 4.0 * u * m;
    return out;
}

LossValueGrad total_loss(const SyntheticGraph& s, const TargetStats& t, const LossWeights& w, const Vector* mask,
                         const MatchOptions& opts) {
    if (w.alpha < 0 || w.beta_d < 0 || w.gamma < 0) throw ParameterError("loss weights must be non-negative");
    check_shapes(s, t);
    LossValueGrad out = LossValueGrad::zeros_like(s);
    if (w.alpha != 0) out.add_scaled(eigenbasis_loss(s, t, mask, opts), w.alpha);
    if (w.beta_d != 0) out.add_scaled(discriminative_loss(s, t, mask), w.beta_d);
    if (w.gamma != 0) out.add_scaled(orthogonality_loss(s), w.gamma);
    return out;
}

double bernoulli_kl(double logit, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw ParameterError("theta must lie in (0, 1)");
    double m = sigmoid(logit);
    double log_m = -softplus(-logit);
    double log_1m = -softplus(logit);
    return m * (log_m - std::log(theta)) + (1.0 - m) * (log_1m - std::log1p(-theta));
}

double bernoulli_kl_term(const Vector& logits, const std::vector<Index>& nodes, double theta, double beta,
                         Vector& grad_logits) {
    if (!(theta > 0.0 && theta < 1.0)) throw ParameterError("theta must lie in (0, 1)");
    if (beta < 0) throw ParameterError("beta_ib must be non-negative");
    if (nodes.empty() || beta == 0) return 0.0;
    const double logit_theta = std::log(theta) - std::log1p(-theta);
    const double w = beta / static_cast<double>(nodes.size());
    double total = 0.0;
    for (Index i : nodes) {
        double z = logits(i);
        double m = sigmoid(z);
        total += bernoulli_kl(z, theta);
        grad_logits(i) += w * m * (1.0 - m) * (z - logit_theta);
    }
    return w * total;
}

LossValueGrad scib_loss(const SyntheticGraph& s, const TargetStats& t, double theta, double beta_ib,
                        const LossWeights& w, const MatchOptions& opts) {
    if (!(theta > 0.0 && theta < 1.0)) throw ParameterError("theta must lie in (0, 1), got " + std::to_string(theta));
    Vector mask = s.mask();
    LossValueGrad out = total_loss(s, t, w, &mask, opts);
    std::vector<Index> all(static_cast<size_t>(s.n_nodes));
    for (Index i = 0; i < s.n_nodes; ++i) all[i] = i;
    out.value += bernoulli_kl_term(s.mask_logits, all, theta, beta_ib, out.grad_mask_logits);
    return out;
}

Vector node_importance(const LossValueGrad& g) { return g.grad_features.rowwise().norm(); }

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Eigenbasis: return "L_e";
        case LossKind::EigenbasisMasked: return "L_e_masked";
        case LossKind::Discriminative: return "L_d";
        case LossKind::DiscriminativeMasked: return "L_d_masked";
        case LossKind::Orthogonality: return "L_o";
        case LossKind::Total: return "L_total";
        case LossKind::Scib: return "L_scib";
    }
    return "unknown";
}

LossValueGrad evaluate_loss(LossKind kind, const SyntheticGraph& s, const TargetStats& t, const GradCheckParams& p) {
    Vector mask = s.mask();
    switch (kind) {
        case LossKind::Eigenbasis: return eigenbasis_loss(s, t, nullptr, p.match);
        case LossKind::EigenbasisMasked: return eigenbasis_loss(s, t, &mask, p.match);
        case LossKind::Discriminative: return discriminative_loss(s, t, nullptr);
        case LossKind::DiscriminativeMasked: return discriminative_loss(s, t, &mask);
        case LossKind::Orthogonality: return orthogonality_loss(s);
        case LossKind::Total: return total_loss(s, t, p.weights, nullptr, p.match);
        case LossKind::Scib: return scib_loss(s, t, p.theta, p.beta_ib, p.weights, p.match);
    }
    throw ParameterError("unknown loss kind");
}

double finite_diff_check(LossKind kind, const SyntheticGraph& s, const TargetStats& t, double eps,
                         const GradCheckParams& p) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ParameterError("finite_diff_check: eps must lie in [1e-7, 1e-3]");
    LossValueGrad analytic = evaluate_loss(kind, s, t, p);
    if (!std::isfinite(analytic.value)) throw NumericError("finite_diff_check: non-finite " + to_string(kind));
    if (p.flip_gradient_sign) {
        analytic.grad_features = -analytic.grad_features;
        analytic.grad_eigenbasis = -analytic.grad_eigenbasis;
        analytic.grad_mask_logits = -analytic.grad_mask_logits;
    }

    SyntheticGraph work = s;
    double worst = 0.0;
    // coordinates far below the largest gradient entry are compared at that scale;
    // the central difference cannot resolve them relative to themselves
    const double floor = std::max({1e-3 * std::max({analytic.grad_features.cwiseAbs().maxCoeff(),
                                                    analytic.grad_eigenbasis.cwiseAbs().maxCoeff(),
                                                    analytic.grad_mask_logits.size() ? analytic.grad_mask_logits.cwiseAbs().maxCoeff() : 0.0}),
                                   1e-12});
    auto probe = [&](double& coord, double a) {
        const double saved = coord;
        coord = saved + eps;
        double up = evaluate_loss(kind, work, t, p).value;
        coord = saved - eps;
        double down = evaluate_loss(kind, work, t, p).value;
        coord = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericError("finite_diff_check: non-finite " + to_string(kind) + " under perturbation");
        double num = (up - down) / (2.0 * eps);
        double denom = std::max({std::abs(a), std::abs(num), floor});
        worst = std::max(worst, std::abs(a - num) / denom);
    };
    for (Index i = 0; i < work.features.rows(); ++i)
        for (Index j = 0; j < work.features.cols(); ++j) probe(work.features(i, j), analytic.grad_features(i, j));
    for (Index j = 0; j < work.eigenbasis.cols(); ++j)
        for (Index i = 0; i < work.eigenbasis.rows(); ++i) probe(work.eigenbasis(i, j), analytic.grad_eigenbasis(i, j));
    for (Index i = 0; i < work.mask_logits.size(); ++i) probe(work.mask_logits(i), analytic.grad_mask_logits(i));
    return worst;
}

}  // namespace bimsgc
