#include "hypercloud/hypercube.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hypercloud/errors.hpp"

namespace hypercloud {
namespace {

constexpr char kCubeMagic[4] = {'H', 'S', 'C', 'B'};
constexpr char kMaskMagic[4] = {'M', 'S', 'K', '1'};
constexpr uint16_t kCubeVersion = 1;
constexpr uint8_t kDtypeF32 = 1;

void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

void write_u16(std::ostream& os, uint16_t v) { write_bytes(os, &v, 2); }
void write_u32(std::ostream& os, uint32_t v) { write_bytes(os, &v, 4); }

bool read_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    return is.gcount() == std::streamsize(n);
}

uint32_t read_u32(std::istream& is, const std::string& what) {
    uint32_t v = 0;
    if (!read_bytes(is, &v, 4)) throw DimMismatch("truncated header: " + what);
    return v;
}

double percentile(std::vector<double>& sorted, double q) {
    // sorted ascending; linear interpolation between adjacent ranks
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double pos = q * double(n - 1);
    size_t lo = size_t(pos);
    if (lo >= n - 1) return sorted[n - 1];
    double frac = pos - double(lo);
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

}  // namespace

HyperCube load_cube(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoFailure("cannot open " + path.string());

    char magic[4];
    if (!read_bytes(is, magic, 4) || std::memcmp(magic, kCubeMagic, 4) != 0)
        throw BadMagic("not a cube file: " + path.string());
    uint16_t version = 0;
    if (!read_bytes(is, &version, 2) || version != kCubeVersion)
        throw BadMagic("unsupported cube version");

    HyperCube cube;
    cube.height = read_u32(is, "height");
    cube.width = read_u32(is, "width");
    cube.channels = read_u32(is, "channels");
    uint8_t dtype = 0;
    if (!read_bytes(is, &dtype, 1) || dtype != kDtypeF32)
        throw BadMagic("unsupported dtype code");
    if (cube.height == 0 || cube.width == 0 || cube.channels == 0)
        throw EmptyCube("cube has a zero extent: " + path.string());

    const size_t count = size_t(cube.height) * cube.width * cube.channels;
    cube.data.resize(count);
    if (!read_bytes(is, cube.data.data(), count * 4))
        throw DimMismatch("payload shorter than H*W*C*4 bytes");
    if (is.peek() != std::char_traits<char>::eof())
        throw DimMismatch("payload longer than H*W*C*4 bytes");
    for (float v : cube.data)
        if (!std::isfinite(v)) throw NonFinite("cube payload contains NaN/Inf");
    return cube;
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
    if (cube.height == 0 || cube.width == 0 || cube.channels == 0)
        throw EmptyCube("refusing to save a cube with a zero extent");
    const size_t count = size_t(cube.height) * cube.width * cube.channels;
    if (cube.data.size() != count)
        throw DimMismatch("data length != height*width*channels");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    write_bytes(os, kCubeMagic, 4);
    write_u16(os, kCubeVersion);
    write_u32(os, cube.height);
    write_u32(os, cube.width);
    write_u32(os, cube.channels);
    write_bytes(os, &kDtypeF32, 1);
    write_bytes(os, cube.data.data(), count * 4);
    if (!os) throw IoFailure("short write to " + path.string());
}

ClassMask load_mask(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoFailure("cannot open " + path.string());

    char magic[4];
    if (!read_bytes(is, magic, 4) || std::memcmp(magic, kMaskMagic, 4) != 0)
        throw BadMagic("not a mask file: " + path.string());

    ClassMask mask;
    mask.height = read_u32(is, "height");
    mask.width = read_u32(is, "width");
    const size_t count = size_t(mask.height) * mask.width;
    mask.labels.resize(count);
    if (!read_bytes(is, mask.labels.data(), count))
        throw DimMismatch("payload shorter than H*W bytes");
    if (is.peek() != std::char_traits<char>::eof())
        throw DimMismatch("payload longer than H*W bytes");
    for (uint8_t v : mask.labels)
        if (v >= kClassCount) throw BadLabel("class id " + std::to_string(v) + " out of range");
    return mask;
}

void save_mask(const ClassMask& mask, const std::filesystem::path& path) {
    if (mask.labels.size() != mask.pixel_count())
        throw DimMismatch("labels length != height*width");
    for (uint8_t v : mask.labels)
        if (v >= kClassCount) throw BadLabel("class id " + std::to_string(v) + " out of range");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    write_bytes(os, kMaskMagic, 4);
    write_u32(os, mask.height);
    write_u32(os, mask.width);
    write_bytes(os, mask.labels.data(), mask.labels.size());
    if (!os) throw IoFailure("short write to " + path.string());
}

std::vector<Tile> tile_scene(const HyperCube& scene, const std::optional<ClassMask>& mask,
                             uint32_t tile_size, const std::string& scene_id) {
    if (tile_size == 0 || tile_size > scene.width)
        throw TileTooLarge("tile size " + std::to_string(tile_size) +
                           " exceeds scene width " + std::to_string(scene.width));
    if (mask && (mask->height != scene.height || mask->width != scene.width))
        throw DimMismatch("mask dimensions do not match scene");

    const uint32_t rows = scene.height / tile_size;
    const uint32_t cols = scene.width / tile_size;
    std::vector<Tile> tiles;
    tiles.reserve(size_t(rows) * cols);
    for (uint32_t tr = 0; tr < rows; ++tr) {
        for (uint32_t tc = 0; tc < cols; ++tc) {
            Tile tile;
            tile.origin_row = tr * tile_size;
            tile.origin_col = tc * tile_size;
            tile.scene_id = scene_id;
            tile.cube.height = tile_size;
            tile.cube.width = tile_size;
            tile.cube.channels = scene.channels;
            tile.cube.wavelengths_nm = scene.wavelengths_nm;
            tile.cube.data.resize(size_t(tile_size) * tile_size * scene.channels);
            for (uint32_t r = 0; r < tile_size; ++r) {
                const float* src = scene.pixel(tile.origin_row + r, tile.origin_col);
                std::copy_n(src, size_t(tile_size) * scene.channels,
                            tile.cube.data.begin() + size_t(r) * tile_size * scene.channels);
            }
            if (mask) {
                ClassMask crop;
                crop.height = tile_size;
                crop.width = tile_size;
                crop.labels.resize(size_t(tile_size) * tile_size);
                for (uint32_t r = 0; r < tile_size; ++r) {
                    const uint8_t* src =
                        mask->labels.data() + size_t(tile.origin_row + r) * mask->width + tile.origin_col;
                    std::copy_n(src, tile_size, crop.labels.begin() + size_t(r) * tile_size);
                }
                tile.mask = std::move(crop);
            }
            tiles.push_back(std::move(tile));
        }
    }
    return tiles;
}

RgbImage rgb_composite(const HyperCube& cube, uint32_t r_band, uint32_t g_band, uint32_t b_band,
                       std::array<uint32_t, 2> aux_bands, double aux_fraction) {
    const std::array<uint32_t, 3> bands = {r_band, g_band, b_band};
    for (uint32_t b : bands)
        if (b >= cube.channels) throw BandOutOfRange("band " + std::to_string(b));
    for (uint32_t b : aux_bands)
        if (b >= cube.channels) throw BandOutOfRange("aux band " + std::to_string(b));
    if (aux_fraction < 0.0 || aux_fraction > 1.0)
        throw BandOutOfRange("aux_fraction must lie in [0,1]");

    const size_t n = cube.pixel_count();
    RgbImage image;
    image.height = cube.height;
    image.width = cube.width;
    image.pixels.assign(n * 3, 0);

    std::vector<double> plane(n), sorted(n);
    for (int ch = 0; ch < 3; ++ch) {
        for (size_t p = 0; p < n; ++p) {
            const float* px = cube.data.data() + p * cube.channels;
            double aux = 0.5 * (double(px[aux_bands[0]]) + double(px[aux_bands[1]]));
            plane[p] = double(px[bands[ch]]) + aux_fraction * aux;
        }
        sorted = plane;
        std::sort(sorted.begin(), sorted.end());
        const double p1 = percentile(sorted, 0.01);
        const double p97 = percentile(sorted, 0.97);
        if (p97 <= p1) continue;  // degenerate stretch: channel stays 0
        const double scale = 255.0 / (p97 - p1);
        for (size_t p = 0; p < n; ++p) {
            double v = std::lround((plane[p] - p1) * scale);
            image.pixels[p * 3 + ch] = uint8_t(std::clamp(v, 0.0, 255.0));
        }
    }
    return image;
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    os << "P6\n" << image.width << " " << image.height << "\n255\n";
    write_bytes(os, image.pixels.data(), image.pixels.size());
    if (!os) throw IoFailure("short write to " + path.string());
}

DatasetStats class_distribution(const std::vector<ClassMask>& masks) {
    if (masks.empty()) throw EmptyInput("no masks");

    DatasetStats stats;
    stats.tile_count = masks.size();
    std::array<size_t, 3> counts{};
    size_t total = 0;
    for (const ClassMask& mask : masks) {
        size_t cloudy = 0;
        for (uint8_t v : mask.labels) {
            ++counts[v];
            if (v != kClassNoCloud) ++cloudy;
        }
        total += mask.labels.size();
        if (!mask.labels.empty()) {
            double coverage = double(cloudy) / double(mask.labels.size());
            size_t bin = std::min<size_t>(9, size_t(coverage * 10.0));
            ++stats.coverage_histogram[bin];
        }
    }
    if (total == 0) throw EmptyInput("masks contain no pixels");
    for (int c = 0; c < 3; ++c) stats.class_fractions[c] = double(counts[c]) / double(total);
    return stats;
}

std::vector<float> load_wavelength_table(const std::filesystem::path& path, uint32_t channels) {
    std::ifstream is(path);
    if (!is) throw IoFailure("cannot open " + path.string());
    std::vector<float> wavelengths(channels, 0.0f);
    std::vector<bool> seen(channels, false);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        long index;
        double nm;
        if (!(ls >> index >> nm)) throw IoFailure("malformed wavelength line: " + line);
        if (index < 0 || size_t(index) >= channels)
            throw BandOutOfRange("wavelength index " + std::to_string(index));
        wavelengths[size_t(index)] = float(nm);
        seen[size_t(index)] = true;
    }
    for (uint32_t i = 0; i < channels; ++i)
        if (!seen[i]) throw DimMismatch("wavelength table misses index " + std::to_string(i));
    for (uint32_t i = 1; i < channels; ++i)
        if (wavelengths[i] <= wavelengths[i - 1])
            throw DimMismatch("wavelengths not strictly increasing");
    return wavelengths;
}

}  // namespace hypercloud
