#pragma once

// Data-parallel inner loops. Every OpenMP kernel here has a plain serial
// twin in kernels::serial that computes the same result element-for-element;
// tests compare the two and bench/ times them against each other.
//
// All parallel loops partition over output rows, so each output element is
// produced by exactly one thread in a fixed order. Results are bitwise
// independent of the thread count.

#include "bimsgc/common.hpp"

#include <span>
#include <utility>
#include <vector>

namespace bimsgc {

/// Compressed sparse row matrix with sorted column indices per row.
struct CsrMatrix {
    Index rows = 0;
    Index cols = 0;
    std::vector<Index> row_ptr{0};
    std::vector<Index> col_idx;
    std::vector<double> values;

    Index nnz() const { return static_cast<Index>(col_idx.size()); }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    static CsrMatrix from_triplets(Index rows, Index cols,
                                   std::vector<std::tuple<Index, Index, double>> triplets);

    double coeff(Index r, Index c) const;
    ColMatrix to_dense() const;
};

/// Symmetric normalization with self loops: D~^{-1/2} (A + w I) D~^{-1/2}.
/// `self_weight` = 1 gives the usual GCN propagation matrix.
CsrMatrix normalize_with_self_loops(const CsrMatrix& a, double self_weight = 1.0);

namespace kernels {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);

/// Y = A X for a dense row-major X.
Matrix spmm(const CsrMatrix& a, const Matrix& x);

/// Max-norm distance from each row of `z` to its k-th nearest other row.
std::vector<double> kth_neighbor_distance(const Matrix& z, int k);

/// Number of other rows strictly closer (max-norm) than radius[i] to row i.
std::vector<Index> count_within(const Matrix& z, std::span<const double> radius);

/// k-th neighbor distance in the joint (x, y) space under the max-norm,
/// without materializing the concatenated matrix.
std::vector<double> joint_kth_neighbor_distance(const Matrix& x, const Matrix& y, int k);

namespace serial {
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
Matrix spmm(const CsrMatrix& a, const Matrix& x);
std::vector<double> kth_neighbor_distance(const Matrix& z, int k);
std::vector<Index> count_within(const Matrix& z, std::span<const double> radius);
std::vector<double> joint_kth_neighbor_distance(const Matrix& x, const Matrix& y, int k);
}  // namespace serial

}  // namespace kernels

/// Applies BIMSGC_THREADS (if set) to the OpenMP runtime. Returns the thread count in use.
int configure_threads_from_env();

}  // namespace bimsgc
