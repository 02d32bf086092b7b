#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hypercloud {

// Radiance cube in band-interleaved-by-pixel order: the full spectrum of a
// pixel is contiguous, which is what the per-pixel 1D model consumes.
// height runs along track (scan direction), width is the fixed cross-track
// extent of a push-broom scene.
struct HyperCube {
    uint32_t height = 0;
    uint32_t width = 0;
    uint32_t channels = 0;
    std::vector<float> data;            // height*width*channels, BIP order
    std::vector<float> wavelengths_nm;  // empty, or one entry per channel, strictly increasing

    float at(uint32_t r, uint32_t c, uint32_t ch) const {
        return data[(size_t(r) * width + c) * channels + ch];
    }
    float& at(uint32_t r, uint32_t c, uint32_t ch) {
        return data[(size_t(r) * width + c) * channels + ch];
    }
    const float* pixel(uint32_t r, uint32_t c) const {
        return data.data() + (size_t(r) * width + c) * channels;
    }
    size_t pixel_count() const { return size_t(height) * width; }
};

inline constexpr uint8_t kClassNoCloud = 0;
inline constexpr uint8_t kClassThinCloud = 1;
inline constexpr uint8_t kClassThickCloud = 2;
inline constexpr int kClassCount = 3;

struct ClassMask {
    uint32_t height = 0;
    uint32_t width = 0;
    std::vector<uint8_t> labels;  // height*width, every value < 3

    uint8_t at(uint32_t r, uint32_t c) const { return labels[size_t(r) * width + c]; }
    size_t pixel_count() const { return size_t(height) * width; }
};

struct Tile {
    HyperCube cube;
    std::optional<ClassMask> mask;
    uint32_t origin_row = 0;
    uint32_t origin_col = 0;
    std::string scene_id;
};

struct DatasetStats {
    size_t tile_count = 0;
    std::array<double, 3> class_fractions{};
    // Per-tile cloud coverage (classes 1+2), 10 equal bins over [0,1].
    std::array<size_t, 10> coverage_histogram{};
};

struct RgbImage {
    uint32_t height = 0;
    uint32_t width = 0;
    std::vector<uint8_t> pixels;  // height*width*3
};

// .hsc: magic "HSCB", version u16, H,W,C u32, dtype u8 (1 = f32),
// payload little-endian float32 in BIP order.
HyperCube load_cube(const std::filesystem::path& path);
void save_cube(const HyperCube& cube, const std::filesystem::path& path);

// .msk: magic "MSK1", H,W u32, one byte per pixel.
ClassMask load_mask(const std::filesystem::path& path);
void save_mask(const ClassMask& mask, const std::filesystem::path& path);

// Non-overlapping tile_size x tile_size grid anchored at (0,0); partial
// leftovers are dropped. Throws TileTooLarge when tile_size exceeds the
// cross-track width.
std::vector<Tile> tile_scene(const HyperCube& scene, const std::optional<ClassMask>& mask,
                             uint32_t tile_size, const std::string& scene_id = "");

// Per output channel: band + aux_fraction * mean(aux bands), then a linear
// stretch mapping the 1st percentile to 0 and the 97th to 255, clipped.
// A constant channel (p1 == p97) maps to 0.
RgbImage rgb_composite(const HyperCube& cube, uint32_t r_band, uint32_t g_band, uint32_t b_band,
                       std::array<uint32_t, 2> aux_bands, double aux_fraction);

void save_ppm(const RgbImage& image, const std::filesystem::path& path);

DatasetStats class_distribution(const std::vector<ClassMask>& masks);

// Two-column text table "index,wavelength_nm"; returns one wavelength per
// channel index in [0, channels).
std::vector<float> load_wavelength_table(const std::filesystem::path& path, uint32_t channels);

}  // namespace hypercloud
