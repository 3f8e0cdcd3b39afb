#include <benchmark/benchmark.h>

#include "ncp/acquisition.hpp"

namespace {

void BM_SampleAcquisition(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  ncp::RngStream rng(0, 4);
  ncp::Vector lw(n);
  for (auto& v : lw) v = rng.normal(0.0, 3.0);
  for (auto _ : state) {
    auto idx = ncp::sample_acquisition_log(lw, {0.5, k}, rng);
    benchmark::DoNotOptimize(idx.data());
  }
}
BENCHMARK(BM_SampleAcquisition)->Args({200, 1})->Args({10000, 10})->Args({700000, 10});

void BM_InformationGainWeight(benchmark::State& state) {
  const ncp::Prediction pred{ncp::ModelKind::kBbbNcp, 0.1, 0.4, false, 0.9, std::nullopt};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ncp::log_information_gain_weight(pred, ncp::ModelKind::kBbbNcp, 0.5));
  }
}
BENCHMARK(BM_InformationGainWeight);

}  // namespace
