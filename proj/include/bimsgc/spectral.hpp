#pragma once

#include "bimsgc/common.hpp"
#include "bimsgc/graph.hpp"

#include <cstdint>

namespace bimsgc {

/// The k smallest normalized-Laplacian eigenpairs of a graph.
///
/// eigenvalues are ascending within [-tol, 2 + tol]; column i of
/// `eigenvectors` is u_i with ||L u_i - lambda_i u_i|| <= solver_tol and
/// its first non-negligible entry positive.
struct SpectralBundle {
    Index k = 0;
    Vector eigenvalues;
    ColMatrix eigenvectors;  // n x k
    Vector residual_norms;
    double solver_tol = 0.0;
};

/// Raised when Lanczos runs out of matvecs; carries the best residuals reached.
struct SolverError : NumericError {
    SolverError(const std::string& w, Vector residuals)
        : NumericError(w), achieved_residuals(std::move(residuals)) {}
    Vector achieved_residuals;
};

/// L = I - D^{-1/2} A D^{-1/2}. Isolated nodes keep L_ii = 1 and no off-diagonals.
CsrMatrix normalized_laplacian(const CsrMatrix& adjacency);
inline CsrMatrix normalized_laplacian(const Graph& g) { return normalized_laplacian(g.adjacency); }

struct LanczosOptions {
    Index max_matvecs = 0;  // 0 selects 60 n + 4000
    Index max_basis = 0;    // 0 selects an adaptive size per restart
};

/// k smallest eigenpairs of a sparse symmetric matrix with spectrum in [0, 2].
///
/// Runs Lanczos with full (twice-applied) reorthogonalization on 2I - L so
/// the wanted end of the spectrum is the dominant one. Converged Ritz pairs
/// are locked and later runs are deflated against them; a final deflated run
/// checks that no eigenvalue below the k-th was missed, which is what makes
/// repeated eigenvalues come out with their full multiplicity.
/// Deterministic for fixed (l, k, tol, seed).
SpectralBundle eigs_smallest(const CsrMatrix& l, Index k, double tol, std::uint64_t seed,
                             const LanczosOptions& opts = {});

struct DenseEigen {
    Vector values;      // ascending
    ColMatrix vectors;  // columns, sign-normalized
};

/// Cyclic Jacobi eigensolver for symmetric matrices up to 512 x 512. Used as the
/// independent reference for eigs_smallest.
DenseEigen dense_eig_oracle(const ColMatrix& m);

/// Flips each column so its first entry with |v_i| > 1e-10 max|v| is positive.
void fix_eigenvector_signs(ColMatrix& vectors);

/// ||L u_i - lambda_i u_i||_2 per column.
Vector eigen_residuals(const CsrMatrix& l, const Vector& values, const ColMatrix& vectors);

/// Largest principal angle (radians) between the column spaces of two
/// matrices with orthonormal columns of equal width.
double max_principal_angle(const ColMatrix& a, const ColMatrix& b);

}  // namespace bimsgc
