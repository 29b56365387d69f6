#include "bimsgc/gradcheck.hpp"

#include "bimsgc/gnn.hpp"
#include "bimsgc/losses.hpp"

#include <algorithm>
#include <iomanip>
#include <random>
#include <sstream>

namespace bimsgc {

namespace {

struct LossInstance {
    SyntheticGraph s;
    TargetStats t;
};

// Small SBM graph for the targets plus a generic synthetic graph of matching dims.
LossInstance make_instance(std::uint64_t seed) {
    constexpr Index n_orig = 24, n = 8, d = 6, k = 5;
    constexpr int c = 3;
    Graph g = generate_sbm(n_orig, c, 0.6, 0.15, d, seed);
    g = split_planetoid(g, 2, 0, 0, seed);
    const CsrMatrix l = normalized_laplacian(g);
    DenseEigen de = dense_eig_oracle(l.to_dense());
    SpectralBundle sb;
    sb.k = k;
    sb.eigenvalues = de.values.head(k);
    sb.eigenvectors = de.vectors.leftCols(k);
    sb.residual_norms = eigen_residuals(l, sb.eigenvalues, sb.eigenvectors);
    sb.solver_tol = 1e-10;

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> nd(0.0, 1.0);
    SyntheticGraph s;
    s.n_nodes = n;
    s.n_classes = c;
    s.k_active = k;
    s.features.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) s.features(i, j) = nd(rng);
    s.shared_eigenvalues = sb.eigenvalues;
    // redraw U until no adjacency entry sits within 1e-3 of the clip at zero
    for (int attempt = 0;; ++attempt) {
        ColMatrix u(n, k);
        for (Index j = 0; j < k; ++j)
            for (Index i = 0; i < n; ++i) u(i, j) = nd(rng);
        s.eigenbasis = orthonormalize_columns(u);
        for (Index j = 0; j < k; ++j)
            for (Index i = 0; i < n; ++i) s.eigenbasis(i, j) += 0.05 * nd(rng);
        const ColMatrix b = s.eigenbasis * (Vector::Ones(k) - s.shared_eigenvalues).asDiagonal() * s.eigenbasis.transpose();
        if ((0.5 * (b + b.transpose())).cwiseAbs().minCoeff() >= 1e-3) break;
        if (attempt == 1000) throw NumericError("gradcheck: no kink-free instance found");
    }
    for (Index i = 0; i < n; ++i) s.labels.push_back(static_cast<int>(i * c / n));
    s.mask_logits.resize(n);
    for (Index i = 0; i < n; ++i) s.mask_logits(i) = nd(rng);
    return {std::move(s), target_stats(g, sb)};
}

constexpr LossKind kLossKinds[] = {LossKind::Eigenbasis,    LossKind::EigenbasisMasked,     LossKind::Discriminative,
                                   LossKind::DiscriminativeMasked, LossKind::Orthogonality, LossKind::Total,
                                   LossKind::Scib};

}  // namespace

std::string GradCheckReport::to_csv() const {
    std::ostringstream os;
    os << "suite,name,eps,max_rel_error\n";
    for (const auto& r : rows)
        os << r.suite << "," << r.name << "," << std::setprecision(17) << r.eps << "," << r.max_rel_error << "\n";
    return os.str();
}

double GradCheckReport::worst_at(double eps) const {
    double worst = 0.0;
    for (const auto& r : rows)
        if (r.eps == eps) worst = std::max(worst, r.max_rel_error);
    return worst;
}

GradCheckReport run_gradcheck(std::uint64_t seed, const GradCheckOptions& opts) {
    if (opts.eps.empty() || opts.instances < 1) throw ParameterError("gradcheck: need at least one eps and one instance");
    if (std::find(opts.eps.begin(), opts.eps.end(), opts.pass_eps) == opts.eps.end())
        throw ParameterError("gradcheck: pass_eps must be one of the swept eps values");
    bool fault_known = opts.inject_fault.empty();

    std::vector<LossInstance> instances;
    for (int i = 0; i < opts.instances; ++i) instances.push_back(make_instance(seed + 101 * static_cast<std::uint64_t>(i)));

    GradCheckReport rep;
    auto record = [&](const std::string& suite, const std::string& name, double eps, double err) {
        rep.rows.push_back({suite, name, eps, err});
        if (eps == opts.pass_eps && !(err <= opts.tolerance)) rep.failures.push_back(name);
    };

    for (LossKind kind : kLossKinds) {
        const std::string name = to_string(kind);
        GradCheckParams p;
        p.theta = 0.3;
        p.beta_ib = 0.5;
        p.flip_gradient_sign = name == opts.inject_fault;
        fault_known = fault_known || p.flip_gradient_sign;
        for (double eps : opts.eps) {
            double worst = 0.0;
            for (const auto& in : instances) worst = std::max(worst, finite_diff_check(kind, in.s, in.t, eps, p));
            record("loss", name, eps, worst);
        }
    }
    for (const auto& name : all_arch_names()) {
        const bool flip = name == opts.inject_fault;
        fault_known = fault_known || flip;
        for (double eps : opts.eps) {
            double worst = 0.0;
            for (int i = 0; i < opts.instances; ++i)
                worst = std::max(worst, gnn_finite_diff_check(parse_arch(name), seed + 101 * static_cast<std::uint64_t>(i), eps, flip));
            record("gnn", name, eps, worst);
        }
    }
    if (!fault_known) throw ParameterError("gradcheck: unknown fault target '" + opts.inject_fault + "'");
    return rep;
}

}  // namespace bimsgc
