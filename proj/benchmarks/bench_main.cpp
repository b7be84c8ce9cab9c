#include <benchmark/benchmark.h>

#include "matchnet/mechanisms.hpp"
#include "matchnet/metrics.hpp"
#include "matchnet/net.hpp"
#include "matchnet/train.hpp"

using namespace matchnet;

namespace {

std::vector<PreferenceProfile> profiles(int n, int m, std::size_t count) {
  return sample_profiles({Correlation::Uncorrelated, 0.0, 0.2, n, m, 3}, count);
}

void BM_DeferredAcceptance(benchmark::State& state) {
  const auto ps = profiles(4, 4, 1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(da(ps[i++ % ps.size()], Proposing::Workers));
  }
}
BENCHMARK(BM_DeferredAcceptance);

void BM_RsdExact(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const auto ps = profiles(k, k, 64);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rsd_exact(ps[i++ % ps.size()]));
}
BENCHMARK(BM_RsdExact)->Arg(3)->Arg(4);

void BM_Bvn(benchmark::State& state) {
  const auto ps = profiles(4, 4, 64);
  std::vector<RandomizedMatching> rs;
  for (const auto& p : ps) rs.push_back(rsd_exact(p));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(bvn_decompose(rs[i++ % rs.size()]));
}
BENCHMARK(BM_Bvn);

// Forward pass over a batch of rows; range(0) is the hidden width.
void BM_Forward(benchmark::State& state) {
  NetworkDims dims{4, 4, 4, static_cast<int>(state.range(0))};
  const auto params = init_params(dims, 1);
  const auto ps = profiles(4, 4, static_cast<std::size_t>(state.range(1)));
  const auto inputs = make_inputs(dims, ps);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(params, dims, inputs));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Forward)->Args({64, 1024})->Args({256, 1024})->Unit(benchmark::kMillisecond);

// Exhaustive misreport search for a whole minibatch.
void BM_DefeatingSearch(benchmark::State& state) {
  NetworkDims dims{3, 3, 4, 64};
  const auto params = init_params(dims, 2);
  const auto ps = profiles(3, 3, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(resolve_defeating_reports(params, dims, ps));
  }
}
BENCHMARK(BM_DefeatingSearch)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_LossAndGradient(benchmark::State& state) {
  NetworkDims dims{3, 3, 4, 64};
  const auto params = init_params(dims, 2);
  const auto ps = profiles(3, 3, 128);
  for (auto _ : state) benchmark::DoNotOptimize(loss_minibatch(params, dims, ps, 0.5));
}
BENCHMARK(BM_LossAndGradient)->Unit(benchmark::kMillisecond);

void BM_RegretProfileRsd(benchmark::State& state) {
  const auto ps = profiles(3, 3, 32);
  const auto rsd = lift_mechanism(BaselineKind::RSD);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(regret_profile(*rsd, ps[i++ % ps.size()]));
}
BENCHMARK(BM_RegretProfileRsd)->Unit(benchmark::kMillisecond);

}  // namespace

// benchmark_main.a ships as LTO bytecode for another compiler, so define main here.
BENCHMARK_MAIN();
