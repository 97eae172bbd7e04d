#include <benchmark/benchmark.h>

#include <vector>

#include "cpml/field.hpp"
#include "cpml/lagrange.hpp"
#include "cpml/mpc_baseline.hpp"
#include "cpml/rng.hpp"
#include "cpml/sigmoid_approx.hpp"

namespace {

using namespace cpml;
using field::FieldMatrix;
using field::FieldParams;

const FieldParams kField{};

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = field::uniform_matrix(n, n, kField, rng);
  const auto b = field::uniform_matrix(n, n, kField, rng);
  for (auto _ : state) benchmark::DoNotOptimize(field::matmul(a, b, kField));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

struct Instance {
  std::size_t K, T, N;
  lagrange::EncodingSetup setup;
  FieldMatrix X;
  std::vector<FieldMatrix> Z;
};

Instance make_instance(std::size_t K, std::size_t m, std::size_t d) {
  const std::size_t T = 1;
  const std::size_t N = lagrange::recovery_threshold(K, T, 1);
  Rng rng(7);
  Instance in{K, T, N, lagrange::make_setup(K, T, N, 1, kField), field::uniform_matrix(m, d, kField, rng), {}};
  in.Z = lagrange::draw_masks(T, m / K, d, kField, rng);
  return in;
}

void BM_EncodeDataset(benchmark::State& state) {
  const auto in = make_instance(static_cast<std::size_t>(state.range(0)), 1200, 196);
  for (auto _ : state) benchmark::DoNotOptimize(lagrange::encode_dataset(in.X, in.setup, in.Z));
}
BENCHMARK(BM_EncodeDataset)->Arg(1)->Arg(2)->Arg(4);

sigmoid_approx::QuantizedPoly linear_poly() {
  sigmoid_approx::QuantizedPoly q;
  q.r = 1;
  q.cbar = {field::FieldElement{3}, field::FieldElement{5}};
  q.scales = {6, 0};
  return q;
}

void BM_WorkerFn(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const auto in = make_instance(K, 1200, 196);
  const auto shares = lagrange::encode_dataset(in.X, in.setup, in.Z);
  Rng rng(3);
  const auto W = field::uniform_matrix(196, 1, kField, rng);
  const auto q = linear_poly();
  for (auto _ : state) benchmark::DoNotOptimize(sigmoid_approx::worker_gradient_fn(shares[0].Xtilde, W, q, kField));
}
BENCHMARK(BM_WorkerFn)->Arg(1)->Arg(2)->Arg(4);

void BM_DecodeGradient(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const auto in = make_instance(K, 1200, 196);
  Rng rng(5);
  std::vector<lagrange::WorkerResult> results;
  for (std::size_t i = 0; i < in.setup.threshold(); ++i) {
    results.push_back({i, field::uniform_matrix(196, 1, kField, rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(lagrange::decode_gradient(results, in.setup));
}
BENCHMARK(BM_DecodeGradient)->Arg(1)->Arg(2)->Arg(4);

void BM_MpcRound(benchmark::State& state) {
  const auto config = mpc::MpcConfig::make(static_cast<std::size_t>(state.range(0)), 1, kField);
  Rng rng(9);
  const auto X = field::uniform_matrix(240, 32, kField, rng);
  const auto data = mpc::share_dataset(X, 1, config, rng);
  const auto W = field::uniform_matrix(32, 1, kField, rng);
  const auto q = linear_poly();
  for (auto _ : state) {
    const auto wshares = mpc::shamir_share(W, config.T, config.points, kField, rng);
    benchmark::DoNotOptimize(mpc::mpc_gradient_round(data, wshares, q, config, 1, nullptr));
  }
}
BENCHMARK(BM_MpcRound)->Arg(3)->Arg(7)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
