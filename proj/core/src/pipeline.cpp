#include "hypercloud/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "hypercloud/errors.hpp"
#include "hypercloud/nn.hpp"

namespace hypercloud {
namespace {

void parallel_for(size_t n, int threads, const std::function<void(size_t, size_t)>& body) {
    if (threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    const size_t worker_count = std::min<size_t>(size_t(threads), n);
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    const size_t chunk = (n + worker_count - 1) / worker_count;
    for (size_t w = 0; w < worker_count; ++w) {
        const size_t begin = w * chunk;
        const size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back(body, begin, end);
    }
    for (std::thread& t : workers) t.join();
}

struct AdamState {
    std::vector<LayerGrads> m;
    std::vector<LayerGrads> v;
    size_t t = 0;

    explicit AdamState(const ModelGraph& graph) {
        m.resize(graph.layers.size());
        v.resize(graph.layers.size());
        for (size_t i = 0; i < graph.layers.size(); ++i) {
            if (!graph.layers[i].learnable()) continue;
            m[i] = {Tensor(graph.layers[i].weights.shape), Tensor(graph.layers[i].bias.shape)};
            v[i] = {Tensor(graph.layers[i].weights.shape), Tensor(graph.layers[i].bias.shape)};
        }
    }

    void step(ModelGraph& graph, const std::vector<LayerGrads>& grads, const TrainConfig& config) {
        ++t;
        const double bc1 = 1.0 - std::pow(config.beta1, double(t));
        const double bc2 = 1.0 - std::pow(config.beta2, double(t));
        auto update = [&](Tensor& param, Tensor& mt, Tensor& vt, const Tensor& g) {
            for (size_t j = 0; j < param.size(); ++j) {
                mt.data[j] = config.beta1 * mt.data[j] + (1.0 - config.beta1) * g.data[j];
                vt.data[j] = config.beta2 * vt.data[j] + (1.0 - config.beta2) * g.data[j] * g.data[j];
                param.data[j] -= config.learning_rate * (mt.data[j] / bc1) /
                                 (std::sqrt(vt.data[j] / bc2) + config.epsilon);
            }
        };
        for (size_t i = 0; i < graph.layers.size(); ++i) {
            if (!graph.layers[i].learnable()) continue;
            update(graph.layers[i].weights, m[i].weights, v[i].weights, grads[i].weights);
            update(graph.layers[i].bias, m[i].bias, v[i].bias, grads[i].bias);
        }
    }
};

void accumulate(std::vector<LayerGrads>& acc, const std::vector<LayerGrads>& grads,
                const ModelGraph& graph) {
    for (size_t i = 0; i < graph.layers.size(); ++i) {
        if (!graph.layers[i].learnable()) continue;
        if (acc[i].weights.data.empty())
            acc[i] = {Tensor(graph.layers[i].weights.shape), Tensor(graph.layers[i].bias.shape)};
        for (size_t j = 0; j < grads[i].weights.size(); ++j)
            acc[i].weights.data[j] += grads[i].weights.data[j];
        for (size_t j = 0; j < grads[i].bias.size(); ++j)
            acc[i].bias.data[j] += grads[i].bias.data[j];
    }
}

Tensor spectrum_tensor(const std::vector<double>& spectrum) {
    Tensor t({spectrum.size(), 1});
    t.data = spectrum;
    return t;
}

Tensor crop_tensor(const HyperCube& cube, uint32_t r0, uint32_t c0, uint32_t size) {
    Tensor t({size, size, cube.channels});
    double* dst = t.data.data();
    for (uint32_t r = 0; r < size; ++r) {
        const float* src = cube.pixel(r0 + r, c0);
        for (size_t j = 0; j < size_t(size) * cube.channels; ++j) dst[j] = double(src[j]);
        dst += size_t(size) * cube.channels;
    }
    return t;
}

}  // namespace

SplitPlan split_dataset(std::vector<std::string> tile_ids, uint64_t seed) {
    const size_t n = tile_ids.size();
    if (n < 10) throw TooFewTiles("need at least 10 tiles, got " + std::to_string(n));

    std::mt19937_64 rng(seed);
    std::shuffle(tile_ids.begin(), tile_ids.end(), rng);

    const size_t train_count = size_t(0.7 * double(n));
    const size_t val_count = size_t(0.2 * double(n));
    SplitPlan plan;
    plan.seed = seed;
    plan.train.assign(tile_ids.begin(), tile_ids.begin() + train_count);
    plan.val.assign(tile_ids.begin() + train_count, tile_ids.begin() + train_count + val_count);
    plan.test.assign(tile_ids.begin() + train_count + val_count, tile_ids.end());
    return plan;
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == kLiuNet1DName) return ModelKind::LiuNet1D;
    if (name == kUNet2DSimpleName) return ModelKind::UNet2DSimple;
    throw ChannelMissing("unknown model kind: " + name);
}

const char* model_kind_name(ModelKind kind) {
    return kind == ModelKind::LiuNet1D ? kLiuNet1DName : kUNet2DSimpleName;
}

ScenarioSpec make_scenario(int id, const BandSelection& bands) {
    ScenarioSpec scenario;
    scenario.id = id;
    size_t take;
    switch (id) {
        case 1:
            take = 1;
            scenario.repeats = 91;
            break;
        case 6:
            take = 6;
            scenario.repeats = 16;
            break;
        case 98:
            take = std::min<size_t>(98, bands.channel_indices.size());
            scenario.repeats = 1;
            break;
        default:
            throw ChannelMissing("scenario must be 1, 6, or 98");
    }
    if (bands.channel_indices.size() < take)
        throw ChannelMissing("scenario " + std::to_string(id) + " needs " + std::to_string(take) +
                             " selected channels, got " +
                             std::to_string(bands.channel_indices.size()));
    scenario.channel_indices.assign(bands.channel_indices.begin(),
                                    bands.channel_indices.begin() + take);
    return scenario;
}

ScenarioSpec make_every_second_scenario(size_t cube_channels) {
    return make_scenario(98, select_every_second(cube_channels));
}

std::vector<double> prepare_spectrum(const HyperCube& tile, uint32_t row, uint32_t col,
                                     const ScenarioSpec& scenario) {
    const float* px = tile.pixel(row, col);
    std::vector<double> selected;
    selected.reserve(scenario.channel_indices.size());
    for (size_t idx : scenario.channel_indices) {
        if (idx >= tile.channels)
            throw ChannelMissing("tile has " + std::to_string(tile.channels) +
                                 " channels, selection needs index " + std::to_string(idx));
        selected.push_back(double(px[idx]));
    }
    if (scenario.repeats == 1) return selected;
    return replicate_channels(selected, scenario.repeats);
}

HyperCube select_channels(const HyperCube& tile, const ScenarioSpec& scenario) {
    for (size_t idx : scenario.channel_indices)
        if (idx >= tile.channels)
            throw ChannelMissing("tile has " + std::to_string(tile.channels) +
                                 " channels, selection needs index " + std::to_string(idx));

    HyperCube out;
    out.height = tile.height;
    out.width = tile.width;
    out.channels = uint32_t(scenario.channel_indices.size());
    out.data.resize(tile.pixel_count() * out.channels);
    for (size_t p = 0; p < tile.pixel_count(); ++p) {
        const float* src = tile.data.data() + p * tile.channels;
        float* dst = out.data.data() + p * out.channels;
        for (size_t j = 0; j < out.channels; ++j) dst[j] = src[scenario.channel_indices[j]];
    }
    if (!tile.wavelengths_nm.empty())
        for (size_t idx : scenario.channel_indices)
            out.wavelengths_nm.push_back(tile.wavelengths_nm[idx]);
    return out;
}

std::vector<std::pair<uint32_t, uint32_t>> crop_offsets(uint32_t height, uint32_t width) {
    constexpr uint32_t kCrop = 252;
    if (height < kCrop || width < kCrop)
        throw ShapeMismatch("tile smaller than 252x252");
    std::vector<uint32_t> rows = {0}, cols = {0};
    if (height > kCrop) rows.push_back(height - kCrop);
    if (width > kCrop) cols.push_back(width - kCrop);
    std::vector<std::pair<uint32_t, uint32_t>> offsets;
    for (uint32_t r : rows)
        for (uint32_t c : cols) offsets.emplace_back(r, c);
    return offsets;
}

TrainResult train(const TrainConfig& config, const ScenarioSpec& scenario,
                  const std::vector<Tile>& train_tiles, const std::vector<Tile>& val_tiles,
                  std::ostream* log) {
    if (config.epochs < 1 || config.batch_size < 1)
        throw EmptyInput("epochs and batch size must be >= 1");
    if (train_tiles.empty()) throw TooFewTiles("no training tiles");
    for (const std::vector<Tile>* group : {&train_tiles, &val_tiles})
        for (const Tile& tile : *group)
            if (!tile.mask) throw ChannelMissing("training tiles must carry masks");

    TrainResult result;
    const bool is_1d = config.kind == ModelKind::LiuNet1D;
    if (is_1d)
        result.model = build_liunet_1d(scenario.input_length(), config.seed);
    else
        result.model = build_unet2d_simple(scenario.channel_indices.size(), config.seed);

    // Samples: one pixel per entry for the 1D net, one 252x252 crop for 2D.
    struct Sample {
        uint32_t tile;
        uint32_t row;
        uint32_t col;
    };
    auto collect = [&](const std::vector<Tile>& tiles) {
        std::vector<Sample> samples;
        for (uint32_t i = 0; i < tiles.size(); ++i) {
            if (is_1d) {
                for (uint32_t r = 0; r < tiles[i].cube.height; ++r)
                    for (uint32_t c = 0; c < tiles[i].cube.width; ++c) samples.push_back({i, r, c});
            } else {
                for (auto [r, c] : crop_offsets(tiles[i].cube.height, tiles[i].cube.width))
                    samples.push_back({i, r, c});
            }
        }
        return samples;
    };
    std::vector<Sample> samples = collect(train_tiles);
    std::vector<Sample> val_samples = collect(val_tiles);

    // channel-select 2D inputs once per tile, not once per crop
    auto preselect = [&](const std::vector<Tile>& tiles) {
        std::vector<HyperCube> cubes;
        if (!is_1d)
            for (const Tile& tile : tiles) cubes.push_back(select_channels(tile.cube, scenario));
        return cubes;
    };
    std::vector<HyperCube> train_selected = preselect(train_tiles);
    std::vector<HyperCube> val_selected = preselect(val_tiles);

    auto sample_pass = [&](const std::vector<Tile>& tiles, const std::vector<HyperCube>& selected,
                           const Sample& s, std::vector<LayerGrads>* grads_out) {
        Tensor input;
        std::vector<uint8_t> targets;
        if (is_1d) {
            input = spectrum_tensor(prepare_spectrum(tiles[s.tile].cube, s.row, s.col, scenario));
            targets = {tiles[s.tile].mask->at(s.row, s.col)};
        } else {
            input = crop_tensor(selected[s.tile], s.row, s.col, 252);
            targets.reserve(252 * 252);
            for (uint32_t r = 0; r < 252; ++r)
                for (uint32_t c = 0; c < 252; ++c)
                    targets.push_back(tiles[s.tile].mask->at(s.row + r, s.col + c));
        }
        GradientTape tape;
        Tensor probs = graph_forward(result.model, input, grads_out ? &tape : nullptr);
        const double loss = cross_entropy(probs, targets);
        if (grads_out)
            *grads_out = graph_backward(result.model, tape, cross_entropy_grad(probs, targets));
        return loss;
    };

    std::mt19937_64 rng(config.seed);
    AdamState adam(result.model);

    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        std::shuffle(samples.begin(), samples.end(), rng);

        double epoch_loss = 0.0;
        size_t batch_count = 0;
        for (size_t start = 0; start < samples.size(); start += config.batch_size) {
            const size_t end = std::min(samples.size(), start + config.batch_size);
            std::vector<LayerGrads> batch_grads(result.model.layers.size());
            double batch_loss = 0.0;
            for (size_t i = start; i < end; ++i) {
                std::vector<LayerGrads> grads;
                batch_loss += sample_pass(train_tiles, train_selected, samples[i], &grads);
                accumulate(batch_grads, grads, result.model);
            }
            const double n = double(end - start);
            batch_loss /= n;
            if (!std::isfinite(batch_loss))
                throw NonFiniteLoss("epoch " + std::to_string(epoch + 1) + ", batch " +
                                    std::to_string(batch_count + 1));
            for (size_t i = 0; i < batch_grads.size(); ++i) {
                if (batch_grads[i].weights.data.empty()) continue;
                for (double& g : batch_grads[i].weights.data) g /= n;
                for (double& g : batch_grads[i].bias.data) g /= n;
            }
            adam.step(result.model, batch_grads, config);
            epoch_loss += batch_loss;
            ++batch_count;
        }
        result.train_loss.push_back(epoch_loss / double(batch_count));

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val_samples.empty()) {
            val_loss = 0.0;
            for (const Sample& s : val_samples)
                val_loss += sample_pass(val_tiles, val_selected, s, nullptr);
            val_loss /= double(val_samples.size());
        }
        result.val_loss.push_back(val_loss);

        if (log) {
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                    .count();
            *log << "epoch " << (epoch + 1) << " train_loss " << result.train_loss.back()
                 << " val_loss ";
            if (std::isnan(val_loss))
                *log << "-";
            else
                *log << val_loss;
            *log << " seconds " << seconds << "\n";
        }
    }
    return result;
}

TileInference infer_tile_2d(const ModelGraph& model, const HyperCube& tile, int threads) {
    if (model.input_shape.size() != 3 || tile.channels != model.input_shape[2])
        throw ShapeMismatch("tile channel count does not match the model");

    const auto offsets = crop_offsets(tile.height, tile.width);
    const size_t h = tile.height, w = tile.width;
    std::vector<Tensor> crop_probs(offsets.size());

    parallel_for(offsets.size(), threads, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            Tensor input = crop_tensor(tile, offsets[i].first, offsets[i].second, 252);
            crop_probs[i] = graph_forward(model, input);
        }
    });

    Tensor sums({h, w, 3});
    std::vector<uint32_t> cover(h * w, 0);
    for (size_t i = 0; i < offsets.size(); ++i) {
        const auto [r0, c0] = offsets[i];
        for (uint32_t r = 0; r < 252; ++r)
            for (uint32_t c = 0; c < 252; ++c) {
                const size_t p = size_t(r0 + r) * w + (c0 + c);
                const double* src = crop_probs[i].data.data() + (size_t(r) * 252 + c) * 3;
                double* dst = sums.data.data() + p * 3;
                for (int k = 0; k < 3; ++k) dst[k] += src[k];
                ++cover[p];
            }
    }

    TileInference out;
    out.mask.height = uint32_t(h);
    out.mask.width = uint32_t(w);
    out.mask.labels.resize(h * w);
    out.probabilities = Tensor({h, w, 3});
    for (size_t p = 0; p < h * w; ++p) {
        double* dst = out.probabilities.data.data() + p * 3;
        const double* src = sums.data.data() + p * 3;
        uint8_t best = 0;
        for (int k = 0; k < 3; ++k) {
            dst[k] = src[k] / double(cover[p]);
            if (dst[k] > dst[best]) best = uint8_t(k);  // strict: ties keep the lowest id
        }
        out.mask.labels[p] = best;
    }
    return out;
}

ClassMask infer_tile_1d(const ModelGraph& model, const HyperCube& tile,
                        const ScenarioSpec& scenario, int threads) {
    if (model.input_shape.size() != 2 || model.input_shape[0] != scenario.input_length())
        throw ShapeMismatch("scenario input length does not match the model");

    ClassMask mask;
    mask.height = tile.height;
    mask.width = tile.width;
    mask.labels.resize(tile.pixel_count());

    parallel_for(tile.height, threads, [&](size_t r_begin, size_t r_end) {
        for (size_t r = r_begin; r < r_end; ++r) {
            for (uint32_t c = 0; c < tile.width; ++c) {
                Tensor input = spectrum_tensor(
                    prepare_spectrum(tile, uint32_t(r), c, scenario));
                Tensor probs = graph_forward(model, input);
                uint8_t best = 0;
                for (int k = 1; k < 3; ++k)
                    if (probs.data[size_t(k)] > probs.data[best]) best = uint8_t(k);
                mask.labels[r * tile.width + c] = best;
            }
        }
    });
    return mask;
}

BenchResult benchmark(const ModelGraph& model, ModelKind kind, const ScenarioSpec& scenario,
                      const std::vector<HyperCube>& tiles, size_t repetitions, int threads) {
    if (tiles.empty()) throw TooFewTiles("benchmark needs at least one tile");
    if (repetitions < 1) repetitions = 1;

    // channel selection is input preparation, kept outside the timed region
    std::vector<HyperCube> prepared;
    prepared.reserve(tiles.size());
    for (const HyperCube& tile : tiles)
        prepared.push_back(kind == ModelKind::UNet2DSimple ? select_channels(tile, scenario) : tile);

    auto run_one = [&](const HyperCube& tile) {
        if (kind == ModelKind::UNet2DSimple)
            infer_tile_2d(model, tile, threads);
        else
            infer_tile_1d(model, tile, scenario, threads);
    };

    run_one(prepared.front());  // warm-up, excluded

    BenchResult result;
    result.repetitions = repetitions;
    result.tile_count = tiles.size();
    result.size = size_report(model);
    result.min_seconds = std::numeric_limits<double>::infinity();

    double total = 0.0;
    for (size_t rep = 0; rep < repetitions; ++rep) {
        for (const HyperCube& tile : prepared) {
            const auto start = std::chrono::steady_clock::now();
            run_one(tile);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            total += seconds;
            result.min_seconds = std::min(result.min_seconds, seconds);
            result.max_seconds = std::max(result.max_seconds, seconds);
        }
    }
    result.mean_seconds = total / double(repetitions * tiles.size());
    return result;
}

}  // namespace hypercloud
