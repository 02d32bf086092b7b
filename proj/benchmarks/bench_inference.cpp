// Microbenchmarks for the inference-critical kernels and whole-tile passes.
// Run: build/benchmarks/bench_inference [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "hypercloud/models.hpp"
#include "hypercloud/nn.hpp"
#include "hypercloud/pipeline.hpp"

using namespace hypercloud;

namespace {

HyperCube random_tile(uint32_t height, uint32_t width, uint32_t channels, uint64_t seed) {
    HyperCube cube;
    cube.height = height;
    cube.width = width;
    cube.channels = channels;
    cube.data.resize(size_t(height) * width * channels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (float& v : cube.data) v = dist(rng);
    return cube;
}

ScenarioSpec identity_scenario(size_t channels) {
    ScenarioSpec scenario;
    scenario.id = 98;
    scenario.repeats = 1;
    for (size_t c = 0; c < channels; ++c) scenario.channel_indices.push_back(c);
    return scenario;
}

Tensor filled(std::vector<size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

void bm_conv1d_forward(benchmark::State& state) {
    Tensor input = filled({98, 1}, 0.5);
    Tensor weights = filled({6, 1, 6}, 0.1);
    Tensor bias({6});
    for (auto _ : state) {
        Tensor out = conv1d_forward(input, weights, bias);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(bm_conv1d_forward);

void bm_conv2d_forward(benchmark::State& state) {
    const size_t channels = size_t(state.range(0));
    Tensor input = filled({252, 252, channels}, 0.5);
    Tensor weights = filled({3, 3, channels, 6}, 0.1);
    Tensor bias({6});
    for (auto _ : state) {
        Tensor out = conv2d_forward(input, weights, bias);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(bm_conv2d_forward)->Arg(1)->Arg(6)->Arg(98);

void bm_tile_1d(benchmark::State& state) {
    const uint32_t channels = 98;
    HyperCube tile = random_tile(254, 254, channels, 7);
    ScenarioSpec scenario = make_every_second_scenario(channels);
    ModelGraph model = build_liunet_1d(scenario.input_length(), 7);
    for (auto _ : state) {
        ClassMask mask = infer_tile_1d(model, tile, scenario, int(state.range(0)));
        benchmark::DoNotOptimize(mask.labels.data());
    }
}
BENCHMARK(bm_tile_1d)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void bm_tile_2d(benchmark::State& state) {
    const uint32_t channels = uint32_t(state.range(0));
    HyperCube tile = random_tile(254, 254, channels, 7);
    ModelGraph model = build_unet2d_simple(channels, 7);
    for (auto _ : state) {
        TileInference result = infer_tile_2d(model, tile, int(state.range(1)));
        benchmark::DoNotOptimize(result.mask.labels.data());
    }
}
BENCHMARK(bm_tile_2d)->Args({1, 1})->Args({6, 1})->Args({98, 1})->Args({98, 4})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
