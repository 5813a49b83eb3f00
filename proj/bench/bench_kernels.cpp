// Parallel against serial reference kernels, and masked against dense
// recurrent steps.
#include <random>

#include <benchmark/benchmark.h>

#include "mrn/kernels.hpp"
#include "mrn/profile.hpp"
#include "mrn/recurrent.hpp"

namespace {

constexpr mrn::GridShape kGrid{32, 16, 32, 1};
constexpr int kIn = 24, kOut = 16;

struct Fixture {
  mrn::KernelMap map;
  std::vector<double> in, weights, bias, out;

  Fixture(double occupancy) {
    const auto mask = mrn::random_mask(kGrid, occupancy, 3);
    map = mrn::submanifold_map(*mask.active_set(), mrn::Extent{});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    in.resize(map.n_in * kIn);
    weights.resize(std::size_t(map.taps) * kIn * kOut);
    bias.resize(kOut);
    out.resize(map.n_out * kOut);
    for (auto* v : {&in, &weights, &bias})
      for (double& x : *v) x = n(rng);
  }
};

void BM_ConvParallel(benchmark::State& state) {
  Fixture f(double(state.range(0)) / 100.0);
  for (auto _ : state) {
    mrn::kernels::conv_forward(f.in, f.weights, f.bias, f.map, kIn, kOut, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.counters["MACs"] = double(f.map.pair_count() * kIn * kOut);
}

void BM_ConvSerial(benchmark::State& state) {
  Fixture f(double(state.range(0)) / 100.0);
  for (auto _ : state) {
    mrn::kernels::serial::conv_forward(f.in, f.weights, f.bias, f.map, kIn, kOut, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.counters["MACs"] = double(f.map.pair_count() * kIn * kOut);
}

void BM_RecurrentStep(benchmark::State& state) {
  const bool masked = state.range(0) != 0;
  std::mt19937_64 rng(9);
  const auto params = mrn::MSGRUParams::random(kOut, kIn - kOut, mrn::Extent{}, rng);
  const mrn::DenseVoxelTensor h(kGrid.with_channels(kOut)), x(kGrid.with_channels(kIn - kOut));
  const auto mask = mrn::random_mask(kGrid, 0.15, 4);
  for (auto _ : state) {
    auto out = masked ? mrn::msgru_step(h, x, mask, params) : mrn::dense_gru_step(h, x, params);
    benchmark::DoNotOptimize(out.values().data());
  }
}

}  // namespace

BENCHMARK(BM_ConvParallel)->Arg(15)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvSerial)->Arg(15)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RecurrentStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
