#include <benchmark/benchmark.h>

#include "hwgan/discriminator.hpp"
#include "hwgan/generator.hpp"
#include "hwgan/psf.hpp"
#include "hwgan/rng.hpp"
#include "hwgan/stroke.hpp"

namespace {

hwgan::HandwritingSample bench_sample(int strokes, int points) {
  hwgan::Rng rng(1);
  std::vector<std::vector<std::pair<double, double>>> coords;
  double x = 0.0;
  for (int s = 0; s < strokes; ++s) {
    std::vector<std::pair<double, double>> stroke;
    double y = rng.uniform(0, 40);
    for (int p = 0; p < points; ++p) {
      x += rng.uniform(0.5, 4.0);
      y += rng.uniform(-4.0, 4.0);
      stroke.emplace_back(x, y);
    }
    coords.push_back(std::move(stroke));
  }
  coords[0][0].second = 0.0;
  coords.back().back().second = 60.0;
  return hwgan::make_sample(coords);
}

void BM_PsfPair(benchmark::State& state) {
  hwgan::Rng rng(2);
  double a = rng.uniform(), b = rng.uniform(), c = rng.uniform(),
         d = rng.uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(hwgan::psf_pair(a, b, c, d));
    a += 1e-9;
  }
}
BENCHMARK(BM_PsfPair);

void BM_PsfPipeline(benchmark::State& state) {
  const auto sample = bench_sample(6, 40);
  for (auto _ : state)
    benchmark::DoNotOptimize(hwgan::psf_pipeline(sample));
}
BENCHMARK(BM_PsfPipeline);

void BM_DiscriminatorForward(benchmark::State& state) {
  hwgan::Rng rng(3);
  hwgan::Discriminator<float> disc(hwgan::DiscriminatorConfig{}, rng);
  const auto raster = hwgan::psf_pipeline(bench_sample(6, 40));
  const auto input = hwgan::to_tensor<float>(raster);
  for (auto _ : state) benchmark::DoNotOptimize(disc.forward_prob(input));
}
BENCHMARK(BM_DiscriminatorForward);

void BM_PredictionStep(benchmark::State& state) {
  hwgan::Rng rng(4);
  hwgan::PredictionNet<float> net(hwgan::PredictionConfig{}, rng);
  auto s = net.init_state(1);
  hwgan::nn::Mat<float> x(3, 1);
  x << 0.1f, -0.2f, 0.0f;
  for (auto _ : state) benchmark::DoNotOptimize(net.step(x, s));
}
BENCHMARK(BM_PredictionStep);

void BM_SampleSequence(benchmark::State& state) {
  hwgan::Rng rng(5);
  hwgan::PredictionNet<float> net(hwgan::PredictionConfig{}, rng);
  hwgan::SamplerConfig cfg;
  cfg.max_points = static_cast<int>(state.range(0));
  for (auto _ : state) {
    hwgan::Rng sampler(7);
    benchmark::DoNotOptimize(hwgan::sample_sequence(net, cfg, sampler));
  }
}
BENCHMARK(BM_SampleSequence)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
