// Serial reference kernels against their OpenMP counterparts, plus a full
// Sinkhorn solve on each execution path.
#include "wbc/ot/kernels.hpp"
#include "wbc/ot/sinkhorn.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace wbc;
using namespace wbc::ot;

namespace {

Matrix points(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(n, kEmbeddingDims);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

template <kernels::Exec E>
void BM_pairwise_cost(benchmark::State& st) {
  const auto n = st.range(0);
  const Matrix x = points(n, 1), y = points(n, 2);
  Matrix out(n, n);
  for (auto _ : st) {
    kernels::pairwise_cost(x, y, kStateDims, 0.8, 2, out, E);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * n * n);
}

template <kernels::Exec E>
void BM_row_logsumexp(benchmark::State& st) {
  const auto n = st.range(0);
  Matrix m(n, n);
  kernels::serial::pairwise_cost(points(n, 1), points(n, 2), kStateDims, 0.8, 2, m);
  m /= -0.01;
  const Vector h = Vector::Zero(n);
  Vector out(n);
  for (auto _ : st) {
    kernels::row_logsumexp(m, {h.data(), static_cast<std::size_t>(n)}, {out.data(), static_cast<std::size_t>(n)},
                           E);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * n * n);
}

template <kernels::Exec E>
void BM_sinkhorn(benchmark::State& st) {
  const auto n = st.range(0);
  const auto a = DiscreteMeasure::uniform(points(n, 3)), b = DiscreteMeasure::uniform(points(n, 4));
  SinkhornConfig cfg;
  cfg.epsilon = 0.05;
  cfg.exec = E;
  for (auto _ : st) benchmark::DoNotOptimize(sinkhorn_ot(a, b, cfg, 0.8).cost);
}

}  // namespace

BENCHMARK(BM_pairwise_cost<kernels::Exec::serial>)->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(BM_pairwise_cost<kernels::Exec::parallel>)->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(BM_row_logsumexp<kernels::Exec::serial>)->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(BM_row_logsumexp<kernels::Exec::parallel>)->RangeMultiplier(4)->Range(64, 1024);
BENCHMARK(BM_sinkhorn<kernels::Exec::serial>)->Arg(192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sinkhorn<kernels::Exec::parallel>)->Arg(192)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
