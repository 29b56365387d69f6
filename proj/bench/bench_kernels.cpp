// OpenMP kernels against their serial twins, plus per-epoch loss cost.
#include "bimsgc/graph.hpp"
#include "bimsgc/kernels.hpp"
#include "bimsgc/losses.hpp"
#include "bimsgc/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace bimsgc;

namespace {

Matrix gaussian(Index n, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = nd(rng);
    return m;
}

const CsrMatrix& bench_graph() {
    static CsrMatrix a = normalize_with_self_loops(generate_sbm(3000, 7, 0.004, 0.0005, 1, 1).adjacency);
    return a;
}

template <bool Parallel>
void BM_Spmm(benchmark::State& st) {
    const CsrMatrix& a = bench_graph();
    Matrix x = gaussian(a.rows, st.range(0), 2);
    for (auto _ : st) {
        Matrix y = Parallel ? kernels::spmm(a, x) : kernels::serial::spmm(a, x);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_Spmv(benchmark::State& st) {
    const CsrMatrix& a = bench_graph();
    std::vector<double> x(static_cast<size_t>(a.rows), 1.0), y(x.size());
    for (auto _ : st) {
        if (Parallel) {
            kernels::spmv(a, x, y);
        } else {
            kernels::serial::spmv(a, x, y);
        }
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_KnnCounts(benchmark::State& st) {
    Matrix x = gaussian(st.range(0), 8, 3), y = gaussian(st.range(0), 8, 4);
    for (auto _ : st) {
        auto eps = Parallel ? kernels::joint_kth_neighbor_distance(x, y, 5)
                            : kernels::serial::joint_kth_neighbor_distance(x, y, 5);
        auto nx = Parallel ? kernels::count_within(x, eps) : kernels::serial::count_within(x, eps);
        benchmark::DoNotOptimize(nx.data());
    }
}

void BM_TotalLossEpoch(benchmark::State& st) {
    const Index n = st.range(0), k = 16, d = 64;
    TargetStats t;
    t.k = k;
    t.n_nodes = 4 * n;
    t.projections = gaussian(d, k, 5);
    t.p_mat = gaussian(d, 4, 6);
    SyntheticGraph s;
    s.n_nodes = n;
    s.n_classes = 4;
    s.k_active = k;
    s.features = gaussian(n, d, 7);
    s.eigenbasis = orthonormalize_columns(gaussian(n, k, 8));
    s.shared_eigenvalues = Vector::LinSpaced(k, 0.0, 1.5);
    for (Index i = 0; i < n; ++i) s.labels.push_back(static_cast<int>(i % 4));
    s.mask_logits = Vector::Zero(n);
    for (auto _ : st) {
        auto r = total_loss(s, t, {});
        benchmark::DoNotOptimize(r.value);
    }
}

}  // namespace

BENCHMARK(BM_Spmm<true>)->Arg(64)->Arg(256)->Name("spmm/omp");
BENCHMARK(BM_Spmm<false>)->Arg(64)->Arg(256)->Name("spmm/serial");
BENCHMARK(BM_Spmv<true>)->Name("spmv/omp");
BENCHMARK(BM_Spmv<false>)->Name("spmv/serial");
BENCHMARK(BM_KnnCounts<true>)->Arg(1000)->Arg(4000)->Name("ksg_counts/omp");
BENCHMARK(BM_KnnCounts<false>)->Arg(1000)->Arg(4000)->Name("ksg_counts/serial");
BENCHMARK(BM_TotalLossEpoch)->Arg(128)->Arg(256)->Arg(512)->Name("total_loss");

BENCHMARK_MAIN();
