#include <benchmark/benchmark.h>

#include <vector>

#include "denoiserank/metrics.hpp"
#include "denoiserank/network.hpp"
#include "denoiserank/random.hpp"
#include "denoiserank/sampler.hpp"

namespace {

using namespace denoiserank;

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = standard_normal(rng);
  return v;
}

ModelConfig bench_model(std::size_t k) {
  ModelConfig c;
  c.k = k;
  c.d_model = 64;
  c.blocks = 3;
  return c;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = ad::Tensor::constant({n, n}, normals(n * n, 1));
  const auto b = ad::Tensor::constant({n, n}, normals(n * n, 2));
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_Encode(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenoiseModel model(bench_model(136), ScheduleSpec{}, 1);
  const auto x = ad::Tensor::constant({n, 136}, normals(n * 136, 3));
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(x, {}, ForwardMode{}));
}
BENCHMARK(BM_Encode)->Arg(20)->Arg(120)->Arg(500);

void BM_TrainForwardBackward(benchmark::State& state) {
  const std::size_t n = 120;
  DenoiseModel model(bench_model(136), ScheduleSpec{}, 1);
  const auto x = ad::Tensor::constant({n, 136}, normals(n * 136, 4));
  const auto y = normals(n, 5);
  Rng rng(6);
  for (auto _ : state) {
    model.params().zero_grad();
    const auto out = model.denoise(model.encode(x, {}, {true, &rng}), y, 500, {true, &rng});
    ad::backward(ad::sum(out));
  }
}
BENCHMARK(BM_TrainForwardBackward);

void BM_RankQuery(benchmark::State& state) {
  const ScheduleSpec spec{ScheduleKind::kTruncatedLinear, 1000};
  const DenoiseModel model(bench_model(136), spec, 1);
  const ScheduleTable table(spec);
  QueryGroup group;
  const auto features = normals(120 * 136, 7);
  for (std::size_t i = 0; i < 120; ++i) {
    group.docs.push_back({0, 0, {features.begin() + i * 136, features.begin() + (i + 1) * 136}, i});
  }
  SamplerConfig cfg;
  cfg.reverse_steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rank_query(group, model, table, cfg, 0));
}
BENCHMARK(BM_RankQuery)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_NdcgAt10(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto scores = normals(n, 8);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<double>(i % 5);
  for (auto _ : state) benchmark::DoNotOptimize(ndcg_at_k(scores, labels, 10));
}
BENCHMARK(BM_NdcgAt10)->Arg(20)->Arg(120)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
