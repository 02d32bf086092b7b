#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hypercloud/tensor.hpp"

namespace hypercloud {

enum class LayerKind {
    Conv1D,
    Conv2D,
    MaxPool1D,
    MaxPool2D,
    UpsampleNearest2D,
    Concat,
    ReLU,
    Dense,
    Softmax,
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind;
    std::string name;
    size_t kernel = 0;        // conv kernel size (k taps in 1D, k x k in 2D)
    size_t in_channels = 0;   // conv Cin / dense F
    size_t out_channels = 0;  // conv Cout / dense K
    size_t pool = 2;
    std::vector<int> inputs;  // producer layer indices; -1 = graph input
    Tensor weights;           // empty when not learnable
    Tensor bias;

    bool learnable() const { return !weights.data.empty(); }
    size_t parameter_count() const { return weights.size() + bias.size(); }
};

// Ordered DAG of layers; each layer reads the outputs of earlier layers (or
// the graph input). The last layer is the graph output.
struct ModelGraph {
    std::string name;
    std::vector<LayerSpec> layers;
    std::vector<size_t> input_shape;  // contract, e.g. {98, 1} or {252, 252, C}
    size_t class_count = 3;
};

// Per-layer cached outputs from a recorded forward pass.
struct GradientTape {
    Tensor input;
    std::vector<Tensor> outputs;
    std::vector<std::vector<size_t>> pool_argmax;
    bool recorded = false;
};

struct LayerGrads {
    Tensor weights;
    Tensor bias;
};

Tensor graph_forward(const ModelGraph& graph, const Tensor& input, GradientTape* tape = nullptr);

// Reverse pass over the recorded tape. Returns one LayerGrads per layer
// (empty tensors for non-learnable layers). grad_input, when non-null,
// receives dL/dinput.
std::vector<LayerGrads> graph_backward(const ModelGraph& graph, const GradientTape& tape,
                                       const Tensor& output_grad, Tensor* grad_input = nullptr);

// Static shape propagation; throws InputTooShort / ExtentTooSmall /
// ShapeMismatch where a layer cannot accept its input.
std::vector<std::vector<size_t>> layer_output_shapes(const ModelGraph& graph,
                                                     const std::vector<size_t>& input_shape);

// He-uniform for conv layers, Glorot-uniform for dense, zero biases.
void init_weights(ModelGraph& graph, uint64_t seed);

// Structured text manifest (schema "model/1"): layer list + hyperparameters,
// enough to rebuild the graph bit-exactly once weights are loaded.
void save_manifest(const ModelGraph& graph, const std::filesystem::path& path);
ModelGraph load_manifest(const std::filesystem::path& path);

}  // namespace hypercloud
