#pragma once

#include <filesystem>
#include <iosfwd>

#include "hypercloud/graph.hpp"

namespace hypercloud {

// .wgt: magic "WGT1", version u16, tensor count u32; per tensor:
// name length u16, UTF-8 name, rank u8, element count u32, rank u32
// extents, little-endian float32 payload. One entry per learnable tensor,
// named "<layer>.weight" / "<layer>.bias".
void save_weights(const ModelGraph& graph, std::ostream& os);
void save_weights(const ModelGraph& graph, const std::filesystem::path& path);

// Validates every tensor's shape against the graph's LayerSpec list.
void load_weights(ModelGraph& graph, std::istream& is);
void load_weights(ModelGraph& graph, const std::filesystem::path& path);

// Exact byte size save_weights would produce.
size_t serialized_weight_bytes(const ModelGraph& graph);

}  // namespace hypercloud
