#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

namespace hypercloud {

// Dense row-major N x C matrix of doubles; rows are pixels, columns channels.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return values[r * cols + c]; }
    double at(size_t r, size_t c) const { return values[r * cols + c]; }
};

struct StandardizeResult {
    Matrix data;                  // per-channel mean 0, std 1; degenerate channels all-zero
    std::vector<double> mean;     // per channel
    std::vector<double> stddev;   // population std, per channel
    std::vector<bool> degenerate; // std < 1e-12
};

// Per-channel standardization with the population (1/N) std.
StandardizeResult standardize(const Matrix& pixels);

struct PcaResult {
    std::vector<double> eigenvalues;  // descending
    Matrix eigenvectors;              // row i = i-th eigenvector (orthonormal)
    std::vector<double> pc1_weights;  // |eigenvectors[0][c]| per channel
};

// Eigendecomposition of the population covariance via cyclic Jacobi
// rotations. Sign convention: the largest-magnitude component of each
// eigenvector is positive.
PcaResult pca(const Matrix& pixels);

struct CorrelationClusters {
    Matrix matrix;                                    // C x C Pearson correlations
    std::vector<std::pair<size_t, size_t>> clusters;  // inclusive [lo, hi] index ranges
    std::vector<bool> degenerate_channels;            // zero-variance, isolated as singletons
};

// Contiguous-block clustering: channels are cut wherever the correlation of
// neighbouring channels drops below the threshold.
CorrelationClusters correlation_clusters(const Matrix& pixels, double threshold);

struct ChannelProvenance {
    int source_class = -1;     // -1 when not class-specific
    size_t cluster_lo = 0;
    size_t cluster_hi = 0;
    double pc1_weight = 0.0;
};

struct BandSelection {
    std::vector<size_t> channel_indices;   // sorted, unique
    std::vector<double> wavelengths_nm;    // empty or parallel to channel_indices
    std::vector<ChannelProvenance> provenance;  // empty or parallel to channel_indices
};

// Argmax of pc1_weights; ties go to the lowest index.
BandSelection select_single_channel(const PcaResult& pca);

// Per class: PCA + correlation clustering, max-weight channel per cluster.
// Across classes, picks whose cluster intervals overlap are resolved toward
// the highest PC1 weight.
BandSelection select_per_class_channels(const std::array<Matrix, 3>& pixels_by_class,
                                        double threshold);

// Indices 0, 2, 4, ... (floor(channels/2) of them).
BandSelection select_every_second(size_t channels);

// The ordered spectrum concatenated with itself `repeats` times.
std::vector<double> replicate_channels(const std::vector<double>& spectrum, size_t repeats);

void attach_wavelengths(BandSelection& selection, const std::vector<float>& wavelengths_nm);

// Structured text report, schema "bands/1"; round-trips losslessly.
void save_band_selection(const BandSelection& selection, const std::filesystem::path& path);
BandSelection load_band_selection(const std::filesystem::path& path);

}  // namespace hypercloud
