#include <benchmark/benchmark.h>

#include "ncp/models.hpp"

namespace {

struct Fixture {
  ncp::Model model;
  ncp::Batch batch;
  ncp::PerturbedBatch perturbed;
  ncp::NcpConfig ncp;
};

Fixture fixture(ncp::ModelKind kind) {
  const std::vector<std::size_t> widths = {1, 64, 64};
  ncp::RngStream rng(0, 1);
  Fixture f{ncp::make_model(kind, widths, rng), {ncp::Matrix(10, 1), ncp::Vector(10)}, {}, {}};
  for (std::size_t i = 0; i < 10; ++i) {
    f.batch.x(i, 0) = rng.uniform(-1.2, 1.2);
    f.batch.y[i] = rng.normal();
  }
  f.perturbed = ncp::perturb_inputs(f.batch.x, f.batch.y, f.ncp, {}, rng);
  return f;
}

void BM_DetLoss(benchmark::State& state) {
  const auto f = fixture(ncp::ModelKind::kDet);
  for (auto _ : state) benchmark::DoNotOptimize(ncp::det_loss(f.model.network, f.batch).value);
}
BENCHMARK(BM_DetLoss);

void BM_BbbLoss(benchmark::State& state) {
  const auto f = fixture(ncp::ModelKind::kBbb);
  ncp::RngStream rng(0, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ncp::bbb_loss(f.model.network, *f.model.posterior, {}, f.batch, 100, rng).value);
  }
}
BENCHMARK(BM_BbbLoss);

void BM_BbbNcpLoss(benchmark::State& state) {
  const auto f = fixture(ncp::ModelKind::kBbbNcp);
  ncp::RngStream rng(0, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ncp::bbb_ncp_loss(f.model.network, *f.model.posterior, f.batch, f.perturbed, f.ncp, rng).value);
  }
}
BENCHMARK(BM_BbbNcpLoss);

void BM_OdcNcpLoss(benchmark::State& state) {
  const auto f = fixture(ncp::ModelKind::kOdcNcp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ncp::odc_ncp_loss(f.model.network, f.batch, f.perturbed, f.ncp).value);
  }
}
BENCHMARK(BM_OdcNcpLoss);

void BM_PerturbInputs(benchmark::State& state) {
  const auto f = fixture(ncp::ModelKind::kBbbNcp);
  ncp::RngStream rng(0, 3);
  for (auto _ : state) {
    auto pb = ncp::perturb_inputs(f.batch.x, f.batch.y, f.ncp, {}, rng);
    benchmark::DoNotOptimize(pb.inputs.data().data());
  }
}
BENCHMARK(BM_PerturbInputs);

}  // namespace
