#include "bimsgc/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <tuple>

namespace bimsgc {

CsrMatrix CsrMatrix::from_triplets(Index rows, Index cols,
                                   std::vector<std::tuple<Index, Index, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(static_cast<size_t>(rows) + 1, 0);
    Index prev_r = -1, prev_c = -1;
    for (const auto& [r, c, v] : triplets) {
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw DimensionError("triplet (" + std::to_string(r) + "," + std::to_string(c) +
                                 ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
        if (r == prev_r && c == prev_c) {
            m.values.back() += v;
            continue;
        }
        m.col_idx.push_back(c);
        m.values.push_back(v);
        ++m.row_ptr[r + 1];
        prev_r = r;
        prev_c = c;
    }
    for (Index r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
}

double CsrMatrix::coeff(Index r, Index c) const {
    auto first = col_idx.begin() + row_ptr[r];
    auto last = col_idx.begin() + row_ptr[r + 1];
    auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return 0.0;
    return values[static_cast<size_t>(it - col_idx.begin())];
}

ColMatrix CsrMatrix::to_dense() const {
    ColMatrix d = ColMatrix::Zero(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p) d(r, col_idx[p]) += values[p];
    return d;
}

CsrMatrix normalize_with_self_loops(const CsrMatrix& a, double self_weight) {
    std::vector<std::tuple<Index, Index, double>> trip;
    trip.reserve(static_cast<size_t>(a.nnz() + a.rows));
    for (Index r = 0; r < a.rows; ++r) {
        for (Index p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p)
            trip.emplace_back(r, a.col_idx[p], a.values[p]);
        if (self_weight != 0.0) trip.emplace_back(r, r, self_weight);
    }
    CsrMatrix s = CsrMatrix::from_triplets(a.rows, a.cols, std::move(trip));
    std::vector<double> inv_sqrt(static_cast<size_t>(s.rows), 0.0);
    for (Index r = 0; r < s.rows; ++r) {
        double deg = 0.0;
        for (Index p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p) deg += s.values[p];
        inv_sqrt[r] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    for (Index r = 0; r < s.rows; ++r)
        for (Index p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p)
            s.values[p] *= inv_sqrt[r] * inv_sqrt[s.col_idx[p]];
    return s;
}

namespace {

inline double row_dot(const CsrMatrix& a, Index r, const double* x) {
    double acc = 0.0;
    for (Index p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) acc += a.values[p] * x[a.col_idx[p]];
    return acc;
}

inline void spmm_row(const CsrMatrix& a, const Matrix& x, Matrix& y, Index r) {
    auto out = y.row(r);
    out.setZero();
    for (Index p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) out += a.values[p] * x.row(a.col_idx[p]);
}

inline double maxnorm(const Matrix& z, Index i, Index j) {
    double d = 0.0;
    for (Index c = 0; c < z.cols(); ++c) d = std::max(d, std::abs(z(i, c) - z(j, c)));
    return d;
}

double kth_distance_row(const Matrix& z, Index i, int k, std::vector<double>& scratch) {
    scratch.clear();
    for (Index j = 0; j < z.rows(); ++j)
        if (j != i) scratch.push_back(maxnorm(z, i, j));
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    return scratch[static_cast<size_t>(k - 1)];
}

double joint_kth_distance_row(const Matrix& x, const Matrix& y, Index i, int k,
                              std::vector<double>& scratch) {
    scratch.clear();
    for (Index j = 0; j < x.rows(); ++j)
        if (j != i) scratch.push_back(std::max(maxnorm(x, i, j), maxnorm(y, i, j)));
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    return scratch[static_cast<size_t>(k - 1)];
}

Index count_row(const Matrix& z, Index i, double radius) {
    Index n = 0;
    for (Index j = 0; j < z.rows(); ++j)
        if (j != i && maxnorm(z, i, j) < radius) ++n;
    return n;
}

void check_k(Index n, int k) {
    if (k < 1 || k >= n)
        throw ParameterError("neighbor count k=" + std::to_string(k) + " needs 1 <= k < n=" +
                             std::to_string(n));
}

}  // namespace

namespace kernels {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < a.rows; ++r) y[r] = row_dot(a, r, x.data());
}

Matrix spmm(const CsrMatrix& a, const Matrix& x) {
    if (a.cols != x.rows()) throw DimensionError("spmm: inner dimensions differ");
    Matrix y(a.rows, x.cols());
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < a.rows; ++r) spmm_row(a, x, y, r);
    return y;
}

std::vector<double> kth_neighbor_distance(const Matrix& z, int k) {
    check_k(z.rows(), k);
    std::vector<double> out(static_cast<size_t>(z.rows()));
#pragma omp parallel
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (Index i = 0; i < z.rows(); ++i) out[i] = kth_distance_row(z, i, k, scratch);
    }
    return out;
}

std::vector<double> joint_kth_neighbor_distance(const Matrix& x, const Matrix& y, int k) {
    check_k(x.rows(), k);
    std::vector<double> out(static_cast<size_t>(x.rows()));
#pragma omp parallel
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (Index i = 0; i < x.rows(); ++i) out[i] = joint_kth_distance_row(x, y, i, k, scratch);
    }
    return out;
}

std::vector<Index> count_within(const Matrix& z, std::span<const double> radius) {
    std::vector<Index> out(static_cast<size_t>(z.rows()));
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < z.rows(); ++i) out[i] = count_row(z, i, radius[i]);
    return out;
}

namespace serial {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
    for (Index r = 0; r < a.rows; ++r) y[r] = row_dot(a, r, x.data());
}

Matrix spmm(const CsrMatrix& a, const Matrix& x) {
    if (a.cols != x.rows()) throw DimensionError("spmm: inner dimensions differ");
    Matrix y(a.rows, x.cols());
    for (Index r = 0; r < a.rows; ++r) spmm_row(a, x, y, r);
    return y;
}

std::vector<double> kth_neighbor_distance(const Matrix& z, int k) {
    check_k(z.rows(), k);
    std::vector<double> out(static_cast<size_t>(z.rows()));
    std::vector<double> scratch;
    for (Index i = 0; i < z.rows(); ++i) out[i] = kth_distance_row(z, i, k, scratch);
    return out;
}

std::vector<double> joint_kth_neighbor_distance(const Matrix& x, const Matrix& y, int k) {
    check_k(x.rows(), k);
    std::vector<double> out(static_cast<size_t>(x.rows()));
    std::vector<double> scratch;
    for (Index i = 0; i < x.rows(); ++i) out[i] = joint_kth_distance_row(x, y, i, k, scratch);
    return out;
}

std::vector<Index> count_within(const Matrix& z, std::span<const double> radius) {
    std::vector<Index> out(static_cast<size_t>(z.rows()));
    for (Index i = 0; i < z.rows(); ++i) out[i] = count_row(z, i, radius[i]);
    return out;
}

}  // namespace serial
}  // namespace kernels

int configure_threads_from_env() {
    if (const char* env = std::getenv("BIMSGC_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
    return omp_get_max_threads();
}

}  // namespace bimsgc
