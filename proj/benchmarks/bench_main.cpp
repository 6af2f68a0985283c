#include <benchmark/benchmark.h>

#include "flipkljn/analytics.hpp"
#include "flipkljn/harness.hpp"
#include "flipkljn/optimize.hpp"
#include "flipkljn/rng.hpp"

using namespace flipkljn;

static void BM_GaussianSampling(benchmark::State& state) {
  GaussianStream g(make_stream(1, 0, 0, StreamPurpose::WireSignal));
  double acc = 0;
  for (auto _ : state) {
    acc += g.next();
  }
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GaussianSampling);

static void BM_VarianceEstimate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  GaussianStream g(make_stream(2, 0, 0, StreamPurpose::WireSignal));
  double acc = 0;
  for (auto _ : state) {
    acc += sample_variance_estimate(1.0, n, g);
  }
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_VarianceEstimate)->Arg(25)->Arg(100)->Arg(200);

static void BM_Exchange(benchmark::State& state) {
  const auto env = build_environment(1.38e-23, 300, 1e6, 1000, 10);
  ProtocolConfig cfg;
  cfg.scheme = Scheme::FlipKLJN;
  cfg.detector = static_cast<DetectorKind>(state.range(1));
  cfg.samples = static_cast<int>(state.range(0));
  cfg.thresholds = {1.35, 3.4, 1.35, 3.4};
  Session s = Session::initial();
  std::uint64_t e = 0;
  for (auto _ : state) {
    Xoshiro256pp bits = make_stream(3, 0, e, StreamPurpose::ProtocolBits);
    GaussianStream wire(make_stream(3, 0, e, StreamPurpose::WireSignal));
    ExchangeStreams streams;
    streams.wire = &wire;
    benchmark::DoNotOptimize(run_exchange(s, cfg, env, bits, streams, nullptr, e));
    ++e;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Exchange)
    ->Args({100, static_cast<int>(DetectorKind::VoltageOnly)})
    ->Args({100, static_cast<int>(DetectorKind::JVCD)})
    ->Args({25, static_cast<int>(DetectorKind::JVCD)});

static void BM_TotalBep(benchmark::State& state) {
  const AnalyticInputs in{10.0, 1.35, 3.4, 100};
  const TailLaw law = state.range(0) == 0 ? TailLaw::CltGaussian : TailLaw::ChiSquare;
  double acc = 0;
  for (auto _ : state) {
    acc += total_bep(in, law);
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_TotalBep)->Arg(0)->Arg(1);

static void BM_ThresholdResolution(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        resolve_thresholds(10.0, static_cast<int>(state.range(0)), DetectorKind::JVCD));
  }
}
BENCHMARK(BM_ThresholdResolution)->Arg(25)->Arg(100);

BENCHMARK_MAIN();
