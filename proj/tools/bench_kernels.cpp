// Parallel kernels against the serial reference on graph-sized inputs.

#include <benchmark/benchmark.h>

#include "krd/graph.hpp"
#include "krd/kernels.hpp"
#include "krd/knowledge.hpp"
#include "krd/models.hpp"

using namespace krd;

namespace {

DenseMatrix random_dense(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

const GraphBundle& bench_graph() {
  static const GraphBundle g = synth_graph({2000, 7, 0.01, 0.0005, 0.5, 1, 128});
  return g;
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_dense(n, 128, 1), b = random_dense(128, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}

void BM_matmul_reference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_dense(n, 128, 1), b = random_dense(128, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::matmul(a, b));
}

void BM_spmm(benchmark::State& state) {
  const auto adj = normalize_adjacency(bench_graph());
  const DenseMatrix x = random_dense(bench_graph().num_nodes, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(spmm(adj.matrix, x));
}

void BM_spmm_reference(benchmark::State& state) {
  const auto adj = normalize_adjacency(bench_graph());
  const DenseMatrix x = random_dense(bench_graph().num_nodes, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::spmm(adj.matrix, x));
}

void BM_reliability(benchmark::State& state) {
  const GraphBundle& g = bench_graph();
  const auto adj = normalize_adjacency(g);
  TrainConfig tc;
  tc.hidden = 64;
  const TeacherModel t(Network(make_architecture(ModelKind::gcn, g.num_features, g.num_classes, tc), 4));
  for (auto _ : state)
    benchmark::DoNotOptimize(quantify_reliability(t, adj, g.features, 1.0, static_cast<std::size_t>(state.range(0)), Rng(5)));
}

}  // namespace

BENCHMARK(BM_matmul)->Arg(500)->Arg(2000);
BENCHMARK(BM_matmul_reference)->Arg(500)->Arg(2000);
BENCHMARK(BM_spmm);
BENCHMARK(BM_spmm_reference);
BENCHMARK(BM_reliability)->Arg(1)->Arg(10);

BENCHMARK_MAIN();
