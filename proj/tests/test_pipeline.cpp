#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "hypercloud/errors.hpp"
#include "hypercloud/graph.hpp"
#include "hypercloud/models.hpp"
#include "hypercloud/nn.hpp"
#include "hypercloud/pipeline.hpp"

using namespace hypercloud;

namespace {

HyperCube random_cube(uint32_t h, uint32_t w, uint32_t c, uint64_t seed) {
    HyperCube cube;
    cube.height = h;
    cube.width = w;
    cube.channels = c;
    cube.data.resize(size_t(h) * w * c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (float& v : cube.data) v = dist(rng);
    return cube;
}

// Synthetic separable tiles: class = f(row band), spectrum shifted per class.
Tile separable_tile(uint32_t h, uint32_t w, uint32_t channels, uint64_t seed) {
    Tile tile;
    tile.cube.height = h;
    tile.cube.width = w;
    tile.cube.channels = channels;
    tile.cube.data.resize(size_t(h) * w * channels);
    ClassMask mask;
    mask.height = h;
    mask.width = w;
    mask.labels.resize(size_t(h) * w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> noise(-0.05f, 0.05f);
    std::uniform_int_distribution<int> cls_dist(0, 2);
    for (uint32_t r = 0; r < h; ++r)
        for (uint32_t c = 0; c < w; ++c) {
            const int cls = cls_dist(rng);
            mask.labels[size_t(r) * w + c] = uint8_t(cls);
            for (uint32_t ch = 0; ch < channels; ++ch)
                tile.cube.at(r, c, ch) = float(cls) * 0.4f + 0.2f + noise(rng);
        }
    tile.mask = std::move(mask);
    return tile;
}

}  // namespace

TEST_CASE("split_dataset cuts 70/20/10 and partitions deterministically") {
    std::vector<std::string> ids;
    for (int i = 0; i < 23; ++i) ids.push_back("tile_" + std::to_string(i));

    SplitPlan a = split_dataset(ids, 7);
    SplitPlan b = split_dataset(ids, 7);
    SplitPlan c = split_dataset(ids, 8);

    CHECK(a.train.size() == size_t(0.7 * 23));  // 16
    CHECK(a.val.size() == size_t(0.2 * 23));    // 4
    CHECK(a.test.size() == 23 - 16 - 4);        // 3

    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);

    std::set<std::string> all;
    for (const auto* group : {&a.train, &a.val, &a.test})
        for (const std::string& id : *group) all.insert(id);
    CHECK(all.size() == 23);

    ids.resize(9);
    CHECK_THROWS_AS(split_dataset(ids, 0), TooFewTiles);
}

TEST_CASE("model kind names round-trip") {
    CHECK(model_kind_from_name("liunet1d") == ModelKind::LiuNet1D);
    CHECK(model_kind_from_name("unet2dsimple") == ModelKind::UNet2DSimple);
    CHECK(model_kind_name(ModelKind::LiuNet1D) == std::string("liunet1d"));
    CHECK(model_kind_name(ModelKind::UNet2DSimple) == std::string("unet2dsimple"));
    CHECK_THROWS_AS(model_kind_from_name("resnet"), ChannelMissing);
}

TEST_CASE("scenarios replicate selected channels to the paper input lengths") {
    BandSelection bands;
    bands.channel_indices = {4, 9, 14, 20, 33, 47};

    ScenarioSpec one = make_scenario(1, bands);
    CHECK(one.channel_indices == std::vector<size_t>{4});
    CHECK(one.repeats == 91);
    CHECK(one.input_length() == 91);

    ScenarioSpec six = make_scenario(6, bands);
    CHECK(six.channel_indices == bands.channel_indices);
    CHECK(six.repeats == 16);
    CHECK(six.input_length() == 96);

    ScenarioSpec all = make_scenario(98, bands);
    CHECK(all.channel_indices == bands.channel_indices);
    CHECK(all.repeats == 1);

    BandSelection small;
    small.channel_indices = {1, 2};
    CHECK_THROWS_AS(make_scenario(6, small), ChannelMissing);
    CHECK_THROWS_AS(make_scenario(12, bands), ChannelMissing);

    ScenarioSpec every = make_every_second_scenario(200);
    CHECK(every.id == 98);
    CHECK(every.channel_indices.size() == 98);  // 100 every-second picks, truncated
    CHECK(every.channel_indices.front() == 0);
    CHECK(every.channel_indices.back() == 194);
}

TEST_CASE("prepare_spectrum selects, replicates, and validates") {
    HyperCube cube = random_cube(3, 4, 10, 5);
    ScenarioSpec scenario;
    scenario.id = 6;
    scenario.channel_indices = {0, 3, 9};
    scenario.repeats = 2;

    std::vector<double> spectrum = prepare_spectrum(cube, 1, 2, scenario);
    REQUIRE(spectrum.size() == 6);
    CHECK(spectrum[0] == double(cube.at(1, 2, 0)));
    CHECK(spectrum[1] == double(cube.at(1, 2, 3)));
    CHECK(spectrum[2] == double(cube.at(1, 2, 9)));
    CHECK(spectrum[3] == spectrum[0]);
    CHECK(spectrum[5] == spectrum[2]);

    scenario.channel_indices = {10};
    CHECK_THROWS_AS(prepare_spectrum(cube, 0, 0, scenario), ChannelMissing);
}

TEST_CASE("select_channels subsets a cube in place") {
    HyperCube cube = random_cube(4, 5, 8, 6);
    cube.wavelengths_nm = {400, 410, 420, 430, 440, 450, 460, 470};
    ScenarioSpec scenario;
    scenario.channel_indices = {1, 6};

    HyperCube out = select_channels(cube, scenario);
    CHECK(out.height == 4);
    CHECK(out.width == 5);
    CHECK(out.channels == 2);
    CHECK(out.wavelengths_nm == std::vector<float>{410, 460});
    for (uint32_t r = 0; r < 4; ++r)
        for (uint32_t c = 0; c < 5; ++c) {
            CHECK(out.at(r, c, 0) == cube.at(r, c, 1));
            CHECK(out.at(r, c, 1) == cube.at(r, c, 6));
        }

    scenario.channel_indices = {9};
    CHECK_THROWS_AS(select_channels(cube, scenario), ChannelMissing);
}

TEST_CASE("crop_offsets covers a tile with the four corner crops") {
    auto offsets = crop_offsets(254, 254);
    REQUIRE(offsets.size() == 4);
    CHECK(offsets[0] == std::pair<uint32_t, uint32_t>{0, 0});
    CHECK(offsets[1] == std::pair<uint32_t, uint32_t>{0, 2});
    CHECK(offsets[2] == std::pair<uint32_t, uint32_t>{2, 0});
    CHECK(offsets[3] == std::pair<uint32_t, uint32_t>{2, 2});

    CHECK(crop_offsets(252, 252).size() == 1);
    CHECK(crop_offsets(252, 260).size() == 2);
    CHECK_THROWS_AS(crop_offsets(251, 254), ShapeMismatch);
}

TEST_CASE("training is seed-deterministic and reduces the loss on separable data") {
    std::vector<Tile> train_tiles, val_tiles;
    for (uint64_t s = 0; s < 4; ++s) train_tiles.push_back(separable_tile(10, 10, 8, s));
    val_tiles.push_back(separable_tile(10, 10, 8, 77));

    TrainConfig config;
    config.kind = ModelKind::LiuNet1D;
    config.epochs = 3;
    config.batch_size = 22;
    config.seed = 5;

    ScenarioSpec scenario;
    scenario.id = 98;
    scenario.channel_indices = {0, 1, 2, 3, 4, 5, 6, 7};
    scenario.repeats = 12;  // input length 96

    std::ostringstream log_a;
    TrainResult a = train(config, scenario, train_tiles, val_tiles, &log_a);
    TrainResult b = train(config, scenario, train_tiles, val_tiles, nullptr);

    REQUIRE(a.train_loss.size() == 3);
    REQUIRE(a.val_loss.size() == 3);
    CHECK(a.train_loss.back() < a.train_loss.front());
    CHECK(a.val_loss.back() < 1.1);
    for (size_t i = 0; i < a.model.layers.size(); ++i) {
        CHECK(a.model.layers[i].weights.data == b.model.layers[i].weights.data);
        CHECK(a.model.layers[i].bias.data == b.model.layers[i].bias.data);
    }

    // run log: one structured line per epoch
    std::istringstream lines(log_a.str());
    std::string line;
    size_t count = 0;
    while (std::getline(lines, line)) {
        std::istringstream ls(line);
        std::string kw_epoch, kw_train, kw_val, kw_seconds, val;
        size_t n;
        double train_loss, seconds;
        REQUIRE((ls >> kw_epoch >> n >> kw_train >> train_loss >> kw_val >> val >> kw_seconds >>
                 seconds));
        CHECK(kw_epoch == "epoch");
        CHECK(n == count + 1);
        CHECK(kw_train == "train_loss");
        CHECK(kw_val == "val_loss");
        CHECK(kw_seconds == "seconds");
        CHECK(train_loss == doctest::Approx(a.train_loss[count]));
        ++count;
    }
    CHECK(count == 3);

    SUBCASE("no validation tiles yields NaN entries and a dash in the log") {
        config.epochs = 1;
        std::ostringstream log;
        TrainResult no_val = train(config, scenario, train_tiles, {}, &log);
        CHECK(std::isnan(no_val.val_loss[0]));
        CHECK(log.str().find("val_loss -") != std::string::npos);
    }
    SUBCASE("missing masks are rejected") {
        std::vector<Tile> bare = train_tiles;
        bare[0].mask.reset();
        CHECK_THROWS_AS(train(config, scenario, bare, {}, nullptr), ChannelMissing);
    }
    SUBCASE("empty training set is rejected") {
        CHECK_THROWS_AS(train(config, scenario, {}, {}, nullptr), TooFewTiles);
    }
}

TEST_CASE("a zero learning rate leaves the initialization untouched") {
    std::vector<Tile> tiles = {separable_tile(6, 6, 4, 3)};
    TrainConfig config;
    config.kind = ModelKind::LiuNet1D;
    config.epochs = 2;
    config.learning_rate = 0.0;
    config.seed = 11;

    ScenarioSpec scenario;
    scenario.channel_indices = {0, 1, 2, 3};
    scenario.repeats = 24;  // 96

    TrainResult result = train(config, scenario, tiles, {}, nullptr);
    ModelGraph reference = build_liunet_1d(96, 11);
    for (size_t i = 0; i < reference.layers.size(); ++i)
        CHECK(result.model.layers[i].weights.data == reference.layers[i].weights.data);
}

TEST_CASE("2D tile inference averages overlapping crop probabilities") {
    ModelGraph model = build_unet2d_simple(3, 17);
    HyperCube tile = random_cube(254, 254, 3, 18);

    TileInference fused = infer_tile_2d(model, tile, 1);
    REQUIRE(fused.mask.height == 254);
    REQUIRE(fused.mask.width == 254);
    REQUIRE(fused.probabilities.shape == std::vector<size_t>{254, 254, 3});

    // oracle: run the four crops directly and stitch with coverage counts
    auto offsets = crop_offsets(254, 254);
    std::vector<Tensor> crops;
    for (auto [r0, c0] : offsets) {
        Tensor input({252, 252, 3});
        for (uint32_t r = 0; r < 252; ++r)
            for (uint32_t c = 0; c < 252; ++c)
                for (uint32_t ch = 0; ch < 3; ++ch)
                    input.data[(size_t(r) * 252 + c) * 3 + ch] =
                        double(tile.at(r0 + r, c0 + c, ch));
        crops.push_back(graph_forward(model, input));
    }
    std::vector<double> sums(size_t(254) * 254 * 3, 0.0);
    std::vector<int> cover(size_t(254) * 254, 0);
    for (size_t i = 0; i < offsets.size(); ++i)
        for (uint32_t r = 0; r < 252; ++r)
            for (uint32_t c = 0; c < 252; ++c) {
                const size_t p = size_t(offsets[i].first + r) * 254 + offsets[i].second + c;
                for (int k = 0; k < 3; ++k)
                    sums[p * 3 + size_t(k)] += crops[i].data[(size_t(r) * 252 + c) * 3 + size_t(k)];
                ++cover[p];
            }
    for (size_t p = 0; p < size_t(254) * 254; ++p) {
        uint8_t best = 0;
        for (int k = 0; k < 3; ++k) {
            const double avg = sums[p * 3 + size_t(k)] / cover[p];
            CHECK(fused.probabilities.data[p * 3 + size_t(k)] ==
                  doctest::Approx(avg).epsilon(1e-12));
            if (avg > sums[p * 3 + best] / cover[p]) best = uint8_t(k);
        }
        CHECK(fused.mask.labels[p] == best);
    }

    // interior pixels are covered by all four crops, corners by one
    CHECK(cover[0] == 1);
    CHECK(cover[size_t(100) * 254 + 100] == 4);

    SUBCASE("thread count does not change the result") {
        TileInference parallel = infer_tile_2d(model, tile, 4);
        CHECK(parallel.mask.labels == fused.mask.labels);
        CHECK(parallel.probabilities.data == fused.probabilities.data);
    }
    SUBCASE("channel mismatch throws") {
        HyperCube wrong = random_cube(254, 254, 2, 1);
        CHECK_THROWS_AS(infer_tile_2d(model, wrong, 1), ShapeMismatch);
    }
}

TEST_CASE("1D tile inference equals a per-pixel forward pass and is thread-invariant") {
    ScenarioSpec scenario;
    scenario.channel_indices = {0, 2, 4};
    scenario.repeats = 32;  // 96
    ModelGraph model = build_liunet_1d(96, 23);
    HyperCube tile = random_cube(9, 11, 5, 24);

    ClassMask mask = infer_tile_1d(model, tile, scenario, 1);
    ClassMask parallel = infer_tile_1d(model, tile, scenario, 4);
    CHECK(mask.labels == parallel.labels);

    for (uint32_t r = 0; r < 9; ++r)
        for (uint32_t c = 0; c < 11; ++c) {
            Tensor input({96, 1});
            input.data = prepare_spectrum(tile, r, c, scenario);
            Tensor probs = graph_forward(model, input);
            uint8_t best = 0;
            for (int k = 1; k < 3; ++k)
                if (probs.data[size_t(k)] > probs.data[best]) best = uint8_t(k);
            CHECK(mask.at(r, c) == best);
        }

    ModelGraph wrong = build_liunet_1d(91, 1);
    CHECK_THROWS_AS(infer_tile_1d(wrong, tile, scenario, 1), ShapeMismatch);
}

TEST_CASE("benchmark reports coherent statistics") {
    ScenarioSpec scenario;
    scenario.channel_indices = {0, 1, 2};
    scenario.repeats = 1;
    ModelGraph model = build_unet2d_simple(3, 41);
    std::vector<HyperCube> tiles = {random_cube(252, 252, 3, 42), random_cube(252, 252, 3, 43)};

    BenchResult result = benchmark(model, ModelKind::UNet2DSimple, scenario, tiles, 2, 1);
    CHECK(result.tile_count == 2);
    CHECK(result.repetitions == 2);
    CHECK(result.min_seconds > 0.0);
    CHECK(result.min_seconds <= result.mean_seconds);
    CHECK(result.mean_seconds <= result.max_seconds);
    CHECK(result.size.parameter_count == 54 * 3 + 3951);

    CHECK_THROWS_AS(benchmark(model, ModelKind::UNet2DSimple, scenario, {}, 1, 1), TooFewTiles);
}
