// hypercloud: desk-scale cloud-segmentation toolkit for hyperspectral tiles.
// One binary, subcommands wired to the core library:
//   tile -> select -> train -> infer -> eval -> bench -> composite

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hypercloud/bandselect.hpp"
#include "hypercloud/errors.hpp"
#include "hypercloud/graph.hpp"
#include "hypercloud/hypercube.hpp"
#include "hypercloud/metrics.hpp"
#include "hypercloud/models.hpp"
#include "hypercloud/pipeline.hpp"
#include "hypercloud/weights.hpp"

namespace fs = std::filesystem;
using namespace hypercloud;

namespace {

uint64_t resolve_seed(uint64_t flag_seed, bool seed_given) {
    if (seed_given) return flag_seed;
    if (const char* env = std::getenv("HYPERCLOUD_SEED")) return std::stoull(env);
    return 0;
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
    if (!fs::is_directory(dir)) throw IoFailure("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == extension)
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

struct NamedTile {
    std::string name;
    Tile tile;
};

std::vector<NamedTile> load_tiles(const fs::path& dir, bool need_masks) {
    std::vector<NamedTile> tiles;
    for (const fs::path& cube_path : list_files(dir, ".hsc")) {
        NamedTile entry;
        entry.name = cube_path.stem().string();
        entry.tile.cube = load_cube(cube_path);
        entry.tile.scene_id = entry.name;
        fs::path mask_path = cube_path;
        mask_path.replace_extension(".msk");
        if (fs::exists(mask_path))
            entry.tile.mask = load_mask(mask_path);
        else if (need_masks)
            throw IoFailure("missing mask for " + cube_path.string());
        tiles.push_back(std::move(entry));
    }
    if (tiles.empty()) throw EmptyInput("no .hsc tiles in " + dir.string());
    return tiles;
}

ScenarioSpec resolve_scenario(int scenario_id, const std::string& bands_path,
                              uint32_t cube_channels) {
    if (!bands_path.empty()) return make_scenario(scenario_id, load_band_selection(bands_path));
    if (scenario_id == 98) return make_every_second_scenario(cube_channels);
    throw ChannelMissing("scenario " + std::to_string(scenario_id) + " requires --bands");
}

ModelGraph load_model(const std::string& weights_path, std::string manifest_path) {
    if (manifest_path.empty()) manifest_path = weights_path + ".manifest";
    ModelGraph graph = load_manifest(manifest_path);
    load_weights(graph, fs::path(weights_path));
    return graph;
}

int cmd_tile(const fs::path& scene_path, const std::string& mask_path, const fs::path& out_dir,
             uint32_t tile_size) {
    HyperCube scene = load_cube(scene_path);
    std::optional<ClassMask> mask;
    if (!mask_path.empty()) mask = load_mask(mask_path);

    fs::create_directories(out_dir);
    const std::string scene_id = scene_path.stem().string();
    std::vector<Tile> tiles = tile_scene(scene, mask, tile_size, scene_id);
    for (const Tile& tile : tiles) {
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_r%06u_c%06u", tile.origin_row, tile.origin_col);
        const fs::path base = out_dir / (scene_id + suffix);
        save_cube(tile.cube, fs::path(base).replace_extension(".hsc"));
        if (tile.mask) save_mask(*tile.mask, fs::path(base).replace_extension(".msk"));
    }
    std::cout << "wrote " << tiles.size() << " tiles to " << out_dir.string() << "\n";
    return 0;
}

int cmd_select(const fs::path& tiles_dir, const std::string& mode, double threshold,
               const fs::path& out_path, const std::string& wavelengths_path, size_t max_pixels) {
    std::vector<NamedTile> tiles = load_tiles(tiles_dir, mode == "perclass");
    const uint32_t channels = tiles.front().tile.cube.channels;
    for (const NamedTile& t : tiles)
        if (t.tile.cube.channels != channels) throw DimMismatch("tiles disagree on channel count");

    BandSelection selection;
    if (mode == "every2nd") {
        selection = select_every_second(channels);
    } else {
        // deterministic stride subsample across the tile set
        size_t total = 0;
        for (const NamedTile& t : tiles) total += t.tile.cube.pixel_count();
        const size_t stride = std::max<size_t>(1, total / std::max<size_t>(1, max_pixels));

        if (mode == "single") {
            std::vector<double> rows;
            size_t index = 0;
            for (const NamedTile& t : tiles)
                for (size_t p = 0; p < t.tile.cube.pixel_count(); ++p, ++index) {
                    if (index % stride) continue;
                    const float* px = t.tile.cube.data.data() + p * channels;
                    for (uint32_t j = 0; j < channels; ++j) rows.push_back(double(px[j]));
                }
            Matrix pixels(rows.size() / channels, channels);
            pixels.values = std::move(rows);
            selection = select_single_channel(pca(standardize(pixels).data));
        } else if (mode == "perclass") {
            std::array<std::vector<double>, 3> rows;
            size_t index = 0;
            for (const NamedTile& t : tiles)
                for (size_t p = 0; p < t.tile.cube.pixel_count(); ++p, ++index) {
                    if (index % stride) continue;
                    const uint8_t label = t.tile.mask->labels[p];
                    const float* px = t.tile.cube.data.data() + p * channels;
                    for (uint32_t j = 0; j < channels; ++j) rows[label].push_back(double(px[j]));
                }
            std::array<Matrix, 3> by_class;
            for (int c = 0; c < 3; ++c) {
                by_class[c] = Matrix(rows[c].size() / channels, channels);
                by_class[c].values = std::move(rows[c]);
            }
            selection = select_per_class_channels(by_class, threshold);
        } else {
            throw ChannelMissing("unknown mode: " + mode);
        }
    }

    if (!wavelengths_path.empty())
        attach_wavelengths(selection, load_wavelength_table(wavelengths_path, channels));
    save_band_selection(selection, out_path);
    std::cout << "selected " << selection.channel_indices.size() << " channel(s)";
    for (size_t idx : selection.channel_indices) std::cout << " " << idx;
    std::cout << "\n";
    return 0;
}

int cmd_train(const fs::path& tiles_dir, const std::string& model_name, int scenario_id,
              const std::string& bands_path, size_t epochs, size_t batch_size, double lr,
              uint64_t seed, const fs::path& out_path, const std::string& log_path,
              const std::string& dump_init_path) {
    std::vector<NamedTile> tiles = load_tiles(tiles_dir, true);

    std::vector<std::string> ids;
    for (const NamedTile& t : tiles) ids.push_back(t.name);
    SplitPlan plan = split_dataset(ids, seed);

    auto pick = [&](const std::vector<std::string>& names) {
        std::vector<Tile> out;
        for (const std::string& name : names)
            for (const NamedTile& t : tiles)
                if (t.name == name) out.push_back(t.tile);
        return out;
    };
    std::vector<Tile> train_tiles = pick(plan.train);
    std::vector<Tile> val_tiles = pick(plan.val);

    TrainConfig config;
    config.kind = model_kind_from_name(model_name);
    config.epochs = epochs;
    config.batch_size = batch_size;
    config.learning_rate = lr;
    config.seed = seed;

    ScenarioSpec scenario =
        resolve_scenario(scenario_id, bands_path, tiles.front().tile.cube.channels);

    if (!dump_init_path.empty()) {
        ModelGraph initial = config.kind == ModelKind::LiuNet1D
                                 ? build_liunet_1d(scenario.input_length(), seed)
                                 : build_unet2d_simple(scenario.channel_indices.size(), seed);
        save_weights(initial, fs::path(dump_init_path));
    }

    std::ofstream log_file;
    std::ostream* log = &std::cout;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw IoFailure("cannot open " + log_path + " for writing");
        log = &log_file;
    }

    TrainResult result = train(config, scenario, train_tiles, val_tiles, log);
    save_weights(result.model, out_path);
    save_manifest(result.model, fs::path(out_path.string() + ".manifest"));
    std::cout << "trained " << model_name << " for " << epochs << " epochs; weights in "
              << out_path.string() << "\n";
    return 0;
}

int cmd_infer(const fs::path& tiles_dir, const fs::path& out_dir, const std::string& weights_path,
              const std::string& manifest_path, int scenario_id, const std::string& bands_path,
              int threads) {
    ModelGraph model = load_model(weights_path, manifest_path);
    std::vector<NamedTile> tiles = load_tiles(tiles_dir, false);
    ScenarioSpec scenario =
        resolve_scenario(scenario_id, bands_path, tiles.front().tile.cube.channels);

    fs::create_directories(out_dir);
    const bool is_1d = model.input_shape.size() == 2;
    for (const NamedTile& t : tiles) {
        ClassMask mask;
        if (is_1d) {
            mask = infer_tile_1d(model, t.tile.cube, scenario, threads);
        } else {
            mask = infer_tile_2d(model, select_channels(t.tile.cube, scenario), threads).mask;
        }
        save_mask(mask, out_dir / (t.name + ".msk"));
    }
    std::cout << "inferred " << tiles.size() << " tiles into " << out_dir.string() << "\n";
    return 0;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& truth_dir, const fs::path& out_path,
             double threshold, const std::string& model_name, int scenario_id,
             const std::string& split) {
    std::vector<ClassMask> preds, truths;
    std::vector<bool> pred_cloudy, truth_cloudy;
    for (const fs::path& pred_path : list_files(pred_dir, ".msk")) {
        const fs::path truth_path = truth_dir / pred_path.filename();
        if (!fs::exists(truth_path)) throw IoFailure("missing truth mask " + truth_path.string());
        preds.push_back(load_mask(pred_path));
        truths.push_back(load_mask(truth_path));
        pred_cloudy.push_back(cloudy_decision(preds.back(), threshold));
        truth_cloudy.push_back(cloudy_decision(truths.back(), threshold));
    }
    if (preds.empty()) throw EmptyInput("no .msk files in " + pred_dir.string());

    EvalReport report;
    EvalEntry entry;
    entry.model = model_name;
    entry.channels = scenario_id;
    entry.split = split;
    entry.seg = segmentation_scores(preds, truths);
    entry.cls = classification_scores(pred_cloudy, truth_cloudy);
    report.entries.push_back(entry);

    std::cout << render_report(report);
    if (!out_path.empty()) save_report(report, out_path);
    return 0;
}

int cmd_bench(const fs::path& tiles_dir, const std::string& weights_path,
              const std::string& manifest_path, int scenario_id, const std::string& bands_path,
              size_t repetitions, int threads, const fs::path& out_path) {
    ModelGraph model = load_model(weights_path, manifest_path);
    std::vector<NamedTile> named = load_tiles(tiles_dir, false);
    std::vector<HyperCube> tiles;
    for (NamedTile& t : named) tiles.push_back(std::move(t.tile.cube));
    ScenarioSpec scenario = resolve_scenario(scenario_id, bands_path, tiles.front().channels);

    const ModelKind kind =
        model.input_shape.size() == 2 ? ModelKind::LiuNet1D : ModelKind::UNet2DSimple;
    BenchResult result = benchmark(model, kind, scenario, tiles, repetitions, threads);

    std::cout << "model " << model.name << " channels " << scenario_id << "\n"
              << "tiles " << result.tile_count << " repetitions " << result.repetitions << "\n"
              << "inference seconds per tile: mean " << result.mean_seconds << " min "
              << result.min_seconds << " max " << result.max_seconds << "\n"
              << "parameters " << result.size.parameter_count << " memory bytes "
              << result.size.bytes_in_memory << " disk bytes " << result.size.bytes_on_disk
              << "\n";
    if (!out_path.empty()) {
        EvalReport report;
        report.bench.push_back({model.name, scenario_id, result});
        save_report(report, out_path);
    }
    return 0;
}

int cmd_composite(const fs::path& scene_path, const fs::path& out_path, uint32_t r_band,
                  uint32_t g_band, uint32_t b_band, uint32_t aux1, uint32_t aux2,
                  double aux_fraction) {
    HyperCube cube = load_cube(scene_path);
    RgbImage image = rgb_composite(cube, r_band, g_band, b_band, {aux1, aux2}, aux_fraction);
    save_ppm(image, out_path);
    std::cout << "wrote " << out_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypercloud: hyperspectral cloud segmentation toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    // tile
    auto* tile_cmd = app.add_subcommand("tile", "split a scene into fixed-size tiles");
    fs::path tile_scene_path, tile_out_dir;
    std::string tile_mask;
    uint32_t tile_size = 254;
    tile_cmd->add_option("scene", tile_scene_path, "input .hsc scene")->required();
    tile_cmd->add_option("out_dir", tile_out_dir, "output tile directory")->required();
    tile_cmd->add_option("--mask", tile_mask, "matching .msk scene mask");
    tile_cmd->add_option("--tile-size", tile_size, "tile edge length in pixels");

    // select
    auto* select_cmd = app.add_subcommand("select", "choose spectral channels on the ground segment");
    fs::path select_dir, select_out;
    std::string select_mode = "perclass", select_wavelengths;
    double select_threshold = 0.9;
    size_t select_max_pixels = 100000;
    select_cmd->add_option("tiles_dir", select_dir, "directory of .hsc tiles")->required();
    select_cmd->add_option("--mode", select_mode, "single | perclass | every2nd")
        ->check(CLI::IsMember({"single", "perclass", "every2nd"}));
    select_cmd->add_option("--threshold", select_threshold, "correlation cluster threshold");
    select_cmd->add_option("--out", select_out, "output bands file")->required();
    select_cmd->add_option("--wavelengths", select_wavelengths, "index,wavelength_nm table");
    select_cmd->add_option("--max-pixels", select_max_pixels, "pixel subsample cap");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on labeled tiles");
    fs::path train_dir, train_out;
    std::string train_model = "liunet1d", train_bands, train_log, train_dump_init;
    int train_scenario = 98;
    size_t train_epochs = 20, train_batch = 22;
    double train_lr = 1e-3;
    uint64_t seed = 0;
    bool seed_given = false;
    train_cmd->add_option("tiles_dir", train_dir, "directory of .hsc + .msk tiles")->required();
    train_cmd->add_option("--model", train_model, "liunet1d | unet2dsimple")
        ->check(CLI::IsMember({kLiuNet1DName, kUNet2DSimpleName}));
    train_cmd->add_option("--scenario", train_scenario, "channel scenario: 1 | 6 | 98");
    train_cmd->add_option("--bands", train_bands, "bands file from `select`");
    train_cmd->add_option("--epochs", train_epochs, "training epochs");
    train_cmd->add_option("--batch", train_batch, "batch size");
    train_cmd->add_option("--lr", train_lr, "Adam learning rate");
    train_cmd->add_option("--out", train_out, "output .wgt weight file")->required();
    train_cmd->add_option("--log", train_log, "run log file (default: stdout)");
    train_cmd->add_option("--dump-init", train_dump_init, "also save the initial weights here");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "predict masks for a directory of tiles");
    fs::path infer_dir, infer_out;
    std::string infer_weights, infer_manifest, infer_bands;
    int infer_scenario = 98, threads = int(std::thread::hardware_concurrency());
    infer_cmd->add_option("tiles_dir", infer_dir, "directory of .hsc tiles")->required();
    infer_cmd->add_option("out_dir", infer_out, "output mask directory")->required();
    infer_cmd->add_option("--weights", infer_weights, "trained .wgt file")->required();
    infer_cmd->add_option("--manifest", infer_manifest, "model manifest (default: <weights>.manifest)");
    infer_cmd->add_option("--scenario", infer_scenario, "channel scenario: 1 | 6 | 98");
    infer_cmd->add_option("--bands", infer_bands, "bands file from `select`");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score predicted masks against ground truth");
    fs::path eval_pred, eval_truth, eval_out;
    std::string eval_model = "model", eval_split = "test";
    int eval_scenario = 98;
    double eval_threshold = 0.70;
    eval_cmd->add_option("--pred", eval_pred, "directory of predicted .msk files")->required();
    eval_cmd->add_option("--truth", eval_truth, "directory of ground-truth .msk files")->required();
    eval_cmd->add_option("--out", eval_out, "output evalreport/1 JSON file");
    eval_cmd->add_option("--threshold", eval_threshold, "cloudy-tile coverage threshold");
    eval_cmd->add_option("--model", eval_model, "model label for the report");
    eval_cmd->add_option("--scenario", eval_scenario, "channel scenario label");
    eval_cmd->add_option("--split", eval_split, "split label: val | test");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "measure per-tile inference time and model size");
    fs::path bench_dir, bench_out;
    std::string bench_weights, bench_manifest, bench_bands;
    int bench_scenario = 98;
    size_t bench_reps = 3;
    bench_cmd->add_option("tiles_dir", bench_dir, "directory of .hsc tiles")->required();
    bench_cmd->add_option("--weights", bench_weights, "trained .wgt file")->required();
    bench_cmd->add_option("--manifest", bench_manifest, "model manifest (default: <weights>.manifest)");
    bench_cmd->add_option("--scenario", bench_scenario, "channel scenario: 1 | 6 | 98");
    bench_cmd->add_option("--bands", bench_bands, "bands file from `select`");
    bench_cmd->add_option("--reps", bench_reps, "timed repetitions per tile");
    bench_cmd->add_option("--out", bench_out, "output evalreport/1 JSON file");

    // composite
    auto* composite_cmd = app.add_subcommand("composite", "render an annotation RGB composite");
    fs::path composite_scene, composite_out;
    uint32_t band_r = 31, band_g = 21, band_b = 13, aux1 = 123, aux2 = 150;
    double aux_fraction = 0.2;
    composite_cmd->add_option("scene", composite_scene, "input .hsc scene")->required();
    composite_cmd->add_option("--out", composite_out, "output .ppm image")->required();
    composite_cmd->add_option("--r", band_r, "red band index");
    composite_cmd->add_option("--g", band_g, "green band index");
    composite_cmd->add_option("--b", band_b, "blue band index");
    composite_cmd->add_option("--aux1", aux1, "first auxiliary band index");
    composite_cmd->add_option("--aux2", aux2, "second auxiliary band index");
    composite_cmd->add_option("--aux-fraction", aux_fraction, "auxiliary band fraction");

    // seed and threads are shared across subcommands
    for (CLI::App* sub : {train_cmd, infer_cmd, bench_cmd}) {
        sub->add_option("--threads", threads, "worker thread cap");
    }
    for (CLI::App* sub : {select_cmd, train_cmd, infer_cmd, bench_cmd}) {
        sub->add_option("--seed", seed, "RNG seed (fallback: HYPERCLOUD_SEED env)")
            ->each([&](const std::string&) { seed_given = true; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        seed = resolve_seed(seed, seed_given);
        if (tile_cmd->parsed())
            return cmd_tile(tile_scene_path, tile_mask, tile_out_dir, tile_size);
        if (select_cmd->parsed())
            return cmd_select(select_dir, select_mode, select_threshold, select_out,
                              select_wavelengths, select_max_pixels);
        if (train_cmd->parsed())
            return cmd_train(train_dir, train_model, train_scenario, train_bands, train_epochs,
                             train_batch, train_lr, seed, train_out, train_log, train_dump_init);
        if (infer_cmd->parsed())
            return cmd_infer(infer_dir, infer_out, infer_weights, infer_manifest, infer_scenario,
                             infer_bands, threads);
        if (eval_cmd->parsed())
            return cmd_eval(eval_pred, eval_truth, eval_out, eval_threshold, eval_model,
                            eval_scenario, eval_split);
        if (bench_cmd->parsed())
            return cmd_bench(bench_dir, bench_weights, bench_manifest, bench_scenario, bench_bands,
                             bench_reps, threads, bench_out);
        if (composite_cmd->parsed())
            return cmd_composite(composite_scene, composite_out, band_r, band_g, band_b, aux1,
                                 aux2, aux_fraction);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: Unexpected: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
