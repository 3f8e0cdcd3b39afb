#include <benchmark/benchmark.h>

#include "ncp/network.hpp"

namespace {

ncp::NetworkParams net(std::size_t width) {
  const std::vector<std::size_t> widths = {8, width, width};
  ncp::RngStream rng(0, 1);
  return ncp::init_params(widths, rng);
}

void BM_Forward(benchmark::State& state) {
  const auto p = net(static_cast<std::size_t>(state.range(0)));
  const ncp::Vector x(8, 0.3);
  ncp::ForwardCache cache;
  for (auto _ : state) {
    ncp::forward(p, x, cache);
    benchmark::DoNotOptimize(cache.output.mean);
  }
}
BENCHMARK(BM_Forward)->Arg(50)->Arg(64)->Arg(200);

void BM_ForwardBackward(benchmark::State& state) {
  const auto p = net(static_cast<std::size_t>(state.range(0)));
  const ncp::Vector x(8, 0.3);
  ncp::ForwardCache cache;
  ncp::Vector grad(p.layout().size());
  for (auto _ : state) {
    ncp::forward(p, x, cache);
    ncp::backward_accumulate(p, cache, {1.0, 0.5, -0.25}, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(50)->Arg(64)->Arg(200);

}  // namespace
