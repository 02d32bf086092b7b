#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hypercloud/graph.hpp"

namespace hypercloud {

inline constexpr const char* kLiuNet1DName = "liunet1d";
inline constexpr const char* kUNet2DSimpleName = "unet2dsimple";

// Four [conv1d k=6 -> relu -> maxpool 2] blocks with filter counts
// 6/12/18/24, then flatten -> dense -> softmax over 3 classes. Throws
// InputTooShort when the shape chain dies before the head.
ModelGraph build_liunet_1d(size_t input_length, uint64_t seed = 0);

// Two-level encoder/decoder over 252x252 tiles: conv3x3 C->6, pool, 6->12,
// pool, bottleneck 12->12, then two upsample+concat+conv stages back to 252,
// and a 1x1 conv head with per-pixel softmax over 3 classes.
ModelGraph build_unet2d_simple(size_t channels, uint64_t seed = 0);

struct SizeReport {
    size_t parameter_count = 0;
    size_t bytes_in_memory = 0;  // parameter_count * 4 (f32 deployment size)
    size_t bytes_on_disk = 0;    // serialized .wgt byte count
    std::vector<std::pair<std::string, size_t>> per_layer;  // (layer name, params)
};

SizeReport size_report(const ModelGraph& model);

}  // namespace hypercloud
