#include "hypercloud/models.hpp"

#include "hypercloud/errors.hpp"
#include "hypercloud/weights.hpp"

namespace hypercloud {
namespace {

LayerSpec conv1d(std::string name, size_t k, size_t cin, size_t cout, int input) {
    LayerSpec layer;
    layer.kind = LayerKind::Conv1D;
    layer.name = std::move(name);
    layer.kernel = k;
    layer.in_channels = cin;
    layer.out_channels = cout;
    layer.inputs = {input};
    layer.weights = Tensor({k, cin, cout});
    layer.bias = Tensor({cout});
    return layer;
}

LayerSpec conv2d(std::string name, size_t k, size_t cin, size_t cout, int input) {
    LayerSpec layer;
    layer.kind = LayerKind::Conv2D;
    layer.name = std::move(name);
    layer.kernel = k;
    layer.in_channels = cin;
    layer.out_channels = cout;
    layer.inputs = {input};
    layer.weights = Tensor({k, k, cin, cout});
    layer.bias = Tensor({cout});
    return layer;
}

LayerSpec plain(LayerKind kind, std::string name, std::vector<int> inputs) {
    LayerSpec layer;
    layer.kind = kind;
    layer.name = std::move(name);
    layer.inputs = std::move(inputs);
    return layer;
}

LayerSpec dense(std::string name, size_t f, size_t k, int input) {
    LayerSpec layer;
    layer.kind = LayerKind::Dense;
    layer.name = std::move(name);
    layer.in_channels = f;
    layer.out_channels = k;
    layer.inputs = {input};
    layer.weights = Tensor({f, k});
    layer.bias = Tensor({k});
    return layer;
}

}  // namespace

ModelGraph build_liunet_1d(size_t input_length, uint64_t seed) {
    constexpr size_t kKernel = 6;
    constexpr size_t kFilters[4] = {6, 12, 18, 24};

    // walk the shape chain first so short inputs fail before allocation
    size_t len = input_length;
    for (int b = 0; b < 4; ++b) {
        if (len < kKernel)
            throw InputTooShort("input length " + std::to_string(input_length) +
                                " dies in conv block " + std::to_string(b + 1));
        len = len - kKernel + 1;
        if (len < 2)
            throw InputTooShort("input length " + std::to_string(input_length) +
                                " dies in pool block " + std::to_string(b + 1));
        len /= 2;
    }

    ModelGraph graph;
    graph.name = kLiuNet1DName;
    graph.input_shape = {input_length, 1};
    graph.class_count = 3;

    size_t cin = 1;
    int prev = -1;
    for (int b = 0; b < 4; ++b) {
        const std::string tag = std::to_string(b + 1);
        graph.layers.push_back(conv1d("conv" + tag, kKernel, cin, kFilters[b], prev));
        prev = int(graph.layers.size()) - 1;
        graph.layers.push_back(plain(LayerKind::ReLU, "relu" + tag, {prev}));
        prev = int(graph.layers.size()) - 1;
        graph.layers.push_back(plain(LayerKind::MaxPool1D, "pool" + tag, {prev}));
        prev = int(graph.layers.size()) - 1;
        cin = kFilters[b];
    }
    graph.layers.push_back(dense("head", len * kFilters[3], 3, prev));
    prev = int(graph.layers.size()) - 1;
    graph.layers.push_back(plain(LayerKind::Softmax, "softmax", {prev}));

    init_weights(graph, seed);
    layer_output_shapes(graph, graph.input_shape);
    return graph;
}

ModelGraph build_unet2d_simple(size_t channels, uint64_t seed) {
    if (channels < 1) throw ShapeMismatch("need at least one channel");

    ModelGraph graph;
    graph.name = kUNet2DSimpleName;
    graph.input_shape = {252, 252, channels};
    graph.class_count = 3;

    graph.layers.push_back(conv2d("enc1_conv", 3, channels, 6, -1));  // 0
    graph.layers.push_back(plain(LayerKind::ReLU, "enc1_relu", {0}));  // 1
    graph.layers.push_back(plain(LayerKind::MaxPool2D, "enc1_pool", {1}));  // 2: 252 -> 126
    graph.layers.push_back(conv2d("enc2_conv", 3, 6, 12, 2));  // 3
    graph.layers.push_back(plain(LayerKind::ReLU, "enc2_relu", {3}));  // 4
    graph.layers.push_back(plain(LayerKind::MaxPool2D, "enc2_pool", {4}));  // 5: 126 -> 63
    graph.layers.push_back(conv2d("bottleneck_conv", 3, 12, 12, 5));  // 6
    graph.layers.push_back(plain(LayerKind::ReLU, "bottleneck_relu", {6}));  // 7
    graph.layers.push_back(plain(LayerKind::UpsampleNearest2D, "dec1_up", {7}));  // 8: 63 -> 126
    graph.layers.push_back(plain(LayerKind::Concat, "dec1_concat", {8, 4}));  // 9: 12+12
    graph.layers.push_back(conv2d("dec1_conv", 3, 24, 6, 9));  // 10
    graph.layers.push_back(plain(LayerKind::ReLU, "dec1_relu", {10}));  // 11
    graph.layers.push_back(plain(LayerKind::UpsampleNearest2D, "dec2_up", {11}));  // 12: 126 -> 252
    graph.layers.push_back(plain(LayerKind::Concat, "dec2_concat", {12, 1}));  // 13: 6+6
    graph.layers.push_back(conv2d("dec2_conv", 3, 12, 6, 13));  // 14
    graph.layers.push_back(plain(LayerKind::ReLU, "dec2_relu", {14}));  // 15
    graph.layers.push_back(conv2d("head_conv", 1, 6, 3, 15));  // 16
    graph.layers.push_back(plain(LayerKind::Softmax, "softmax", {16}));  // 17

    init_weights(graph, seed);
    layer_output_shapes(graph, graph.input_shape);
    return graph;
}

SizeReport size_report(const ModelGraph& model) {
    SizeReport report;
    for (const LayerSpec& layer : model.layers) {
        if (!layer.learnable()) continue;
        const size_t params = layer.parameter_count();
        report.parameter_count += params;
        report.per_layer.emplace_back(layer.name, params);
    }
    report.bytes_in_memory = report.parameter_count * 4;
    report.bytes_on_disk = serialized_weight_bytes(model);
    return report;
}

}  // namespace hypercloud
