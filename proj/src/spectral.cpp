#include "bimsgc/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

namespace bimsgc {

CsrMatrix normalized_laplacian(const CsrMatrix& a) {
    std::vector<double> inv_sqrt(static_cast<size_t>(a.rows), 0.0);
    for (Index r = 0; r < a.rows; ++r) {
        double deg = 0.0;
        for (Index p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) deg += a.values[p];
        inv_sqrt[r] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    std::vector<std::tuple<Index, Index, double>> trip;
    trip.reserve(static_cast<size_t>(a.nnz() + a.rows));
    for (Index r = 0; r < a.rows; ++r) {
        trip.emplace_back(r, r, 1.0);
        for (Index p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
            Index c = a.col_idx[p];
            if (c == r) continue;
            trip.emplace_back(r, c, -a.values[p] * inv_sqrt[r] * inv_sqrt[c]);
        }
    }
    return CsrMatrix::from_triplets(a.rows, a.cols, std::move(trip));
}

void fix_eigenvector_signs(ColMatrix& vectors) {
    for (Index j = 0; j < vectors.cols(); ++j) {
        auto col = vectors.col(j);
        double cutoff = 1e-10 * col.cwiseAbs().maxCoeff();
        for (Index i = 0; i < col.size(); ++i) {
            if (std::abs(col(i)) > cutoff) {
                if (col(i) < 0) col = -col;
                break;
            }
        }
    }
}

Vector eigen_residuals(const CsrMatrix& l, const Vector& values, const ColMatrix& vectors) {
    Vector res(values.size());
    Vector y(l.rows);
    for (Index i = 0; i < values.size(); ++i) {
        Vector u = vectors.col(i);
        kernels::spmv(l, {u.data(), static_cast<size_t>(u.size())}, {y.data(), static_cast<size_t>(y.size())});
        res(i) = (y - values(i) * u).norm();
    }
    return res;
}

double max_principal_angle(const ColMatrix& a, const ColMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("max_principal_angle: shapes differ");
    if (a.cols() == 0) return 0.0;
    ColMatrix resid = b - a * (a.transpose() * b);
    Eigen::JacobiSVD<ColMatrix> svd(resid);
    double s = svd.singularValues()(0);
    return std::asin(std::min(1.0, s));
}

namespace {

// Applies the shifted operator 2I - L.
class ShiftedOperator {
public:
    explicit ShiftedOperator(const CsrMatrix& l) : l_(l), tmp_(l.rows) {}
    void apply(const Vector& x, Vector& y) {
        kernels::spmv(l_, {x.data(), static_cast<size_t>(x.size())},
                      {tmp_.data(), static_cast<size_t>(tmp_.size())});
        y = 2.0 * x - tmp_;
    }

private:
    const CsrMatrix& l_;
    Vector tmp_;
};

struct RitzPair {
    double theta;
    Vector vec;
    double residual;
};

struct RunResult {
    std::vector<RitzPair> converged;  // descending theta
    Vector restart;                   // hint when nothing converged
    double best_residual = 0.0;
};

void orthogonalize(Vector& w, const ColMatrix& basis, Index cols, const ColMatrix& locked) {
    for (int pass = 0; pass < 2; ++pass) {
        if (cols > 0) w -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * w);
        if (locked.cols() > 0) w -= locked * (locked.transpose() * w);
    }
}

Vector random_unit_orthogonal(std::mt19937_64& rng, Index n, const ColMatrix& basis, Index cols,
                              const ColMatrix& locked) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int attempt = 0; attempt < 8; ++attempt) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = nd(rng);
        orthogonalize(v, basis, cols, locked);
        double nv = v.norm();
        if (nv > 1e-8) return v / nv;
    }
    return Vector();
}

// Thick-restart Lanczos (Krylov-Schur form). H = V^T A V is kept explicitly;
// on a full basis the top `keep` Ritz vectors are retained and expansion
// continues from the current residual direction, so A V = V H + w e_m^T holds
// after every expansion and Ritz residuals are |w| * |s_m|.
RunResult lanczos_run(ShiftedOperator& op, const ColMatrix& locked, Vector start, Index want,
                      Index max_basis, double tol, std::mt19937_64& rng, Index& matvecs, Index max_matvecs) {
    const Index n = start.size();
    const Index dim = n - locked.cols();
    const Index cap = std::min(max_basis, dim);
    const Index keep = std::clamp<Index>(want + std::max<Index>(10, want / 2), 1, std::max<Index>(1, cap - 10));
    ColMatrix v(n, cap);
    ColMatrix h = ColMatrix::Zero(cap, cap);
    RunResult result;

    orthogonalize(start, v, 0, locked);
    double sn = start.norm();
    if (sn < 1e-8) {
        start = random_unit_orthogonal(rng, n, v, 0, locked);
        if (start.size() == 0) return result;
    } else {
        start /= sn;
    }
    v.col(0) = start;
    Index m = 1;

    Vector w(n);
    while (true) {
        op.apply(v.col(m - 1), w);
        ++matvecs;
        Vector coef = v.leftCols(m).transpose() * w;
        w -= v.leftCols(m) * coef;
        Vector again = v.leftCols(m).transpose() * w;
        w -= v.leftCols(m) * again;
        coef += again;
        for (int pass = 0; pass < 2 && locked.cols() > 0; ++pass) w -= locked * (locked.transpose() * w);
        h.col(m - 1).head(m) = coef;
        h.row(m - 1).head(m) = coef.transpose();
        const double b = w.norm();
        const bool breakdown = b < 1e-10;
        const bool full = m == cap;

        if (breakdown || full || m == dim || m % 10 == 0) {
            Eigen::SelfAdjointEigenSolver<ColMatrix> eig(h.topLeftCorner(m, m));
            const Vector& theta = eig.eigenvalues();
            const ColMatrix& s = eig.eigenvectors();
            const double scale = breakdown ? 0.0 : b;
            Index converged = 0;
            for (Index i = m - 1; i >= 0; --i) {
                if (scale * std::abs(s(m - 1, i)) <= 0.1 * tol) {
                    ++converged;
                } else {
                    break;
                }
            }
            const bool out_of_budget = full && matvecs > max_matvecs;
            if (converged >= want || breakdown || m == dim || out_of_budget) {
                for (Index c = 0; c < converged; ++c) {
                    Index i = m - 1 - c;
                    Vector y = v.leftCols(m) * s.col(i);
                    y.normalize();
                    result.converged.push_back({theta(i), y, scale * std::abs(s(m - 1, i))});
                }
                if (converged == 0) {
                    Index top = std::min<Index>(want, m);
                    Vector hint = Vector::Zero(n);
                    for (Index c = 0; c < top; ++c) hint += v.leftCols(m) * s.col(m - 1 - c);
                    result.restart = hint;
                    result.best_residual = scale * std::abs(s(m - 1, m - 1));
                }
                return result;
            }
            if (full) {
                const Index p = std::min(keep, m - 1);
                ColMatrix kept = v.leftCols(m) * s.rightCols(p);
                v.leftCols(p) = kept;
                h.setZero();
                for (Index i = 0; i < p; ++i) h(i, i) = theta(m - p + i);
                v.col(p) = w / b;
                m = p + 1;
                continue;
            }
        }
        v.col(m) = w / b;
        ++m;
    }
}

}  // namespace

SpectralBundle eigs_smallest(const CsrMatrix& l, Index k, double tol, std::uint64_t seed,
                             const LanczosOptions& opts) {
    const Index n = l.rows;
    if (l.rows != l.cols) throw DimensionError("eigs_smallest: matrix must be square");
    if (k < 1 || k > n)
        throw ParameterError("eigs_smallest: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" +
                             std::to_string(n) + ")");
    if (!(tol > 0.0)) throw ParameterError("eigs_smallest: tol must be positive");

    const Index max_matvecs = opts.max_matvecs > 0 ? opts.max_matvecs : 60 * n + 4000;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    ShiftedOperator op(l);

    ColMatrix locked(n, 0);
    std::vector<double> locked_theta;
    Index matvecs = 0;
    Vector start(n);
    for (Index i = 0; i < n; ++i) start(i) = nd(rng);
    double last_best = 0.0;

    auto lock = [&](const std::vector<RitzPair>& pairs) {
        Index old = locked.cols();
        locked.conservativeResize(n, old + static_cast<Index>(pairs.size()));
        for (size_t p = 0; p < pairs.size(); ++p) {
            locked.col(old + static_cast<Index>(p)) = pairs[p].vec;
            locked_theta.push_back(pairs[p].theta);
        }
    };
    auto kth_theta = [&]() {
        std::vector<double> t = locked_theta;
        std::nth_element(t.begin(), t.begin() + (k - 1), t.end(), std::greater<>());
        return t[static_cast<size_t>(k - 1)];
    };

    bool verified = false;
    while (!verified) {
        if (matvecs > max_matvecs) {
            Vector res = Vector::Constant(k, last_best);
            throw SolverError("eigs_smallest: no convergence after " + std::to_string(matvecs) +
                                  " matvecs (" + std::to_string(locked.cols()) + "/" + std::to_string(k) +
                                  " pairs converged, best pending residual " + std::to_string(last_best) +
                                  ")",
                              res);
        }
        if (locked.cols() == n) break;
        const bool checking = locked.cols() >= k;
        const Index want = checking ? 1 : k - locked.cols();
        Index basis = opts.max_basis > 0 ? opts.max_basis : std::max<Index>(3 * want + 60, 150);
        RunResult run = lanczos_run(op, locked, start, want, basis, tol, rng, matvecs, max_matvecs);
        for (Index i = 0; i < n; ++i) start(i) = nd(rng);

        if (run.converged.empty()) {
            if (run.restart.size() == n && run.restart.norm() > 0) start = run.restart;
            last_best = run.best_residual;
            continue;
        }
        if (checking) {
            // The complement's dominant eigenvalue must not beat the current k-th.
            const RitzPair& top = run.converged.front();
            if (top.theta <= kth_theta() + tol) {
                verified = true;
            } else {
                lock({top});
            }
        } else {
            lock(run.converged);
        }
    }

    std::vector<Index> order(locked_theta.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return locked_theta[a] > locked_theta[b]; });

    SpectralBundle sb;
    sb.k = k;
    sb.solver_tol = tol;
    sb.eigenvalues.resize(k);
    sb.eigenvectors.resize(n, k);
    for (Index i = 0; i < k; ++i) {
        sb.eigenvalues(i) = 2.0 - locked_theta[order[i]];
        sb.eigenvectors.col(i) = locked.col(order[i]);
    }
    fix_eigenvector_signs(sb.eigenvectors);
    sb.residual_norms = eigen_residuals(l, sb.eigenvalues, sb.eigenvectors);
    for (Index i = 0; i < k; ++i)
        if (!(sb.residual_norms(i) <= tol))
            throw SolverError("eigs_smallest: residual " + std::to_string(sb.residual_norms(i)) +
                                  " above tol for pair " + std::to_string(i),
                              sb.residual_norms);
    return sb;
}

DenseEigen dense_eig_oracle(const ColMatrix& m) {
    const Index n = m.rows();
    if (m.cols() != n) throw DimensionError("dense_eig_oracle: matrix must be square");
    if (n > 512) throw ParameterError("dense_eig_oracle: n=" + std::to_string(n) + " exceeds the 512 guard");

    ColMatrix a = 0.5 * (m + m.transpose());
    ColMatrix v = ColMatrix::Identity(n, n);
    const double fro2 = a.squaredNorm();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i)
                if (i != j) off += a(i, j) * a(i, j);
        if (off <= 1e-30 * fro2 || off == 0.0) break;
        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (apq == 0.0) continue;
                // Symmetric Schur decomposition of the (p, q) 2x2 block.
                double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (Index r = 0; r < n; ++r) {
                    double arp = a(r, p), arq = a(r, q);
                    a(r, p) = c * arp - s * arq;
                    a(r, q) = s * arp + c * arq;
                }
                for (Index r = 0; r < n; ++r) {
                    double apr = a(p, r), aqr = a(q, r);
                    a(p, r) = c * apr - s * aqr;
                    a(q, r) = s * apr + c * aqr;
                }
                for (Index r = 0; r < n; ++r) {
                    double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }

    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) < a(j, j); });
    DenseEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        out.values(i) = a(order[i], order[i]);
        out.vectors.col(i) = v.col(order[i]);
    }
    fix_eigenvector_signs(out.vectors);
    return out;
}

}  // namespace bimsgc
