#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hypercloud/bandselect.hpp"
#include "hypercloud/graph.hpp"
#include "hypercloud/hypercube.hpp"
#include "hypercloud/models.hpp"

namespace hypercloud {

struct SplitPlan {
    uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

// Seeded uniform shuffle, then contiguous cuts at floor(0.7N) / floor(0.2N).
SplitPlan split_dataset(std::vector<std::string> tile_ids, uint64_t seed);

enum class ModelKind { LiuNet1D, UNet2DSimple };

ModelKind model_kind_from_name(const std::string& name);
const char* model_kind_name(ModelKind kind);

// Channel scenario: which bands feed the model and how often the selected
// spectrum is replicated for the 1D net (1 ch x91, 6 ch x16, 98 ch x1).
struct ScenarioSpec {
    int id = 98;                       // 1 | 6 | 98
    std::vector<size_t> channel_indices;
    size_t repeats = 1;

    size_t input_length() const { return channel_indices.size() * repeats; }
};

ScenarioSpec make_scenario(int id, const BandSelection& bands);
// The 98-channel scenario straight from a cube's channel count (every second
// channel, truncated to 98).
ScenarioSpec make_every_second_scenario(size_t cube_channels);

// Channel-selected and replicated pixel spectrum, ready for the 1D net.
std::vector<double> prepare_spectrum(const HyperCube& tile, uint32_t row, uint32_t col,
                                     const ScenarioSpec& scenario);
// Channel-selected cube for the 2D net (no replication).
HyperCube select_channels(const HyperCube& tile, const ScenarioSpec& scenario);

// 252x252 crop offsets covering an H x W tile: {0, H-252} x {0, W-252}.
std::vector<std::pair<uint32_t, uint32_t>> crop_offsets(uint32_t height, uint32_t width);

struct TrainConfig {
    ModelKind kind = ModelKind::LiuNet1D;
    size_t epochs = 20;
    size_t batch_size = 22;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    uint64_t seed = 0;
};

struct TrainResult {
    ModelGraph model;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch; empty entries = no val tiles
};

// Mini-batch Adam on cross-entropy. 1D samples are pixel spectra; 2D samples
// are 252x252 crops (all offsets of each tile). Tiles must carry masks.
// Writes a structured run log ("epoch N train_loss X val_loss Y seconds Z")
// when log is non-null.
TrainResult train(const TrainConfig& config, const ScenarioSpec& scenario,
                  const std::vector<Tile>& train_tiles, const std::vector<Tile>& val_tiles,
                  std::ostream* log = nullptr);

struct TileInference {
    ClassMask mask;
    Tensor probabilities;  // H x W x 3
};

// Runs the 2D net on every 252x252 crop of the (already channel-selected)
// tile, averages class probabilities over the crops covering each pixel,
// then takes the per-pixel argmax (ties toward the lowest class id).
TileInference infer_tile_2d(const ModelGraph& model, const HyperCube& tile, int threads = 1);

// Independent forward pass per pixel spectrum; no spatial coupling.
ClassMask infer_tile_1d(const ModelGraph& model, const HyperCube& tile,
                        const ScenarioSpec& scenario, int threads = 1);

struct BenchResult {
    double mean_seconds = 0.0;
    double min_seconds = 0.0;
    double max_seconds = 0.0;
    size_t repetitions = 0;
    size_t tile_count = 0;
    SizeReport size;
};

// Wall-clock per-tile inference on a monotonic clock; one warm-up pass on
// the first tile is excluded. Input preparation (channel selection) happens
// outside the timed region.
BenchResult benchmark(const ModelGraph& model, ModelKind kind, const ScenarioSpec& scenario,
                      const std::vector<HyperCube>& tiles, size_t repetitions, int threads = 1);

}  // namespace hypercloud
