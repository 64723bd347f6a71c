// Tiled OpenMP rasterizer against the serial per-pixel reference, plus the training step.

#include "splatr/render.hpp"
#include "splatr/train.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace splatr;

namespace {

CameraView camera(int w, int h) {
  CameraView v;
  v.width = w;
  v.height = h;
  v.fx = v.fy = 0.8 * w;
  v.cx = (w - 1) / 2.0;
  v.cy = (h - 1) / 2.0;
  return v;
}

GaussianCloud scene(int count, const CameraView& v) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GaussianCloud c;
  for (int i = 0; i < count; ++i) {
    Gaussian g;
    const double z = 2.0 + 3.0 * u(rng);
    g.mean = Vec3((u(rng) - 0.5) * z * v.width / v.fx, (u(rng) - 0.5) * z * v.height / v.fy, z);
    g.log_scale = Vec3::Constant(std::log(0.01 + 0.04 * u(rng)));
    g.rotation = normalize_quat(Quat(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5));
    g.opacity_logit = logit(0.2 + 0.7 * u(rng));
    g.sh = {rgb_to_sh_dc(u(rng)), rgb_to_sh_dc(u(rng)), rgb_to_sh_dc(u(rng))};
    c.push_back(g);
  }
  return c;
}

void BM_RenderTiled(benchmark::State& state) {
  const CameraView v = camera(static_cast<int>(state.range(1)), static_cast<int>(state.range(1)) * 3 / 4);
  const GaussianCloud c = scene(static_cast<int>(state.range(0)), v);
  for (auto _ : state) benchmark::DoNotOptimize(render::render(c, v));
}

void BM_RenderReference(benchmark::State& state) {
  const CameraView v = camera(static_cast<int>(state.range(1)), static_cast<int>(state.range(1)) * 3 / 4);
  const GaussianCloud c = scene(static_cast<int>(state.range(0)), v);
  for (auto _ : state) benchmark::DoNotOptimize(render::render_reference(c, v));
}

ImageRGB target(const CameraView& v) {
  ImageRGB img(v.width, v.height);
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(0.5 + 0.4 * std::sin(0.1 * x + 0.2 * y + c));
  return img;
}

void BM_Loss(benchmark::State& state) {
  const CameraView v = camera(static_cast<int>(state.range(1)), static_cast<int>(state.range(1)) * 3 / 4);
  const auto out = render::render(scene(static_cast<int>(state.range(0)), v), v);
  const ImageRGB t = target(v);
  std::vector<double> grad;
  for (auto _ : state) benchmark::DoNotOptimize(train::loss(out, t, 0.2, &grad));
}

void BM_Backward(benchmark::State& state) {
  const CameraView v = camera(static_cast<int>(state.range(1)), static_cast<int>(state.range(1)) * 3 / 4);
  const GaussianCloud c = scene(static_cast<int>(state.range(0)), v);
  const ImageRGB t = target(v);
  for (auto _ : state) benchmark::DoNotOptimize(train::backward(c, v, t, 0.2));
}

}  // namespace

BENCHMARK(BM_Loss)->Args({1000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Backward)->Args({1000, 128})->Args({6000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderTiled)->Args({1000, 128})->Args({10000, 256})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderReference)->Args({1000, 128})->Args({10000, 256})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
