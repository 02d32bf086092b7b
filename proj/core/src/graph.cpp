#include "hypercloud/graph.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "hypercloud/errors.hpp"
#include "hypercloud/nn.hpp"

namespace hypercloud {
namespace {

struct KindName {
    LayerKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::Conv1D, "conv1d"},
    {LayerKind::Conv2D, "conv2d"},
    {LayerKind::MaxPool1D, "maxpool1d"},
    {LayerKind::MaxPool2D, "maxpool2d"},
    {LayerKind::UpsampleNearest2D, "upsample2d"},
    {LayerKind::Concat, "concat"},
    {LayerKind::ReLU, "relu"},
    {LayerKind::Dense, "dense"},
    {LayerKind::Softmax, "softmax"},
};

void check_wiring(const ModelGraph& graph) {
    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& layer = graph.layers[i];
        const size_t need = layer.kind == LayerKind::Concat ? 2 : 1;
        if (layer.inputs.size() != need)
            throw ShapeMismatch("layer " + layer.name + " needs " + std::to_string(need) +
                                " input(s)");
        for (int src : layer.inputs)
            if (src < -1 || src >= int(i))
                throw ShapeMismatch("layer " + layer.name + " has a bad input index");
    }
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
    for (const KindName& entry : kKindNames)
        if (entry.kind == kind) return entry.name;
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    for (const KindName& entry : kKindNames)
        if (name == entry.name) return entry.kind;
    throw ShapeMismatch("unknown layer kind: " + name);
}

Tensor graph_forward(const ModelGraph& graph, const Tensor& input, GradientTape* tape) {
    check_wiring(graph);
    std::vector<Tensor> outputs(graph.layers.size());
    std::vector<std::vector<size_t>> argmax(graph.layers.size());
    auto src = [&](int id) -> const Tensor& { return id < 0 ? input : outputs[size_t(id)]; };

    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& layer = graph.layers[i];
        const Tensor& x = src(layer.inputs[0]);
        switch (layer.kind) {
            case LayerKind::Conv1D:
                outputs[i] = conv1d_forward(x, layer.weights, layer.bias);
                break;
            case LayerKind::Conv2D:
                outputs[i] = conv2d_forward(x, layer.weights, layer.bias);
                break;
            case LayerKind::MaxPool1D:
                outputs[i] = maxpool1d_forward(x, argmax[i]);
                break;
            case LayerKind::MaxPool2D:
                outputs[i] = maxpool2d_forward(x, argmax[i]);
                break;
            case LayerKind::UpsampleNearest2D:
                outputs[i] = upsample_nearest_forward(x);
                break;
            case LayerKind::Concat:
                outputs[i] = concat_forward(x, src(layer.inputs[1]));
                break;
            case LayerKind::ReLU:
                outputs[i] = relu_forward(x);
                break;
            case LayerKind::Dense:
                outputs[i] = dense_forward(x, layer.weights, layer.bias);
                break;
            case LayerKind::Softmax:
                outputs[i] = softmax_forward(x);
                break;
        }
    }

    Tensor result = outputs.back();
    if (tape) {
        tape->input = input;
        tape->outputs = std::move(outputs);
        tape->pool_argmax = std::move(argmax);
        tape->recorded = true;
    }
    return result;
}

std::vector<LayerGrads> graph_backward(const ModelGraph& graph, const GradientTape& tape,
                                       const Tensor& output_grad, Tensor* grad_input) {
    if (!tape.recorded) throw TapeMissing("no forward pass recorded");
    if (tape.outputs.size() != graph.layers.size())
        throw TapeMissing("tape does not match graph");
    if (!output_grad.same_shape(tape.outputs.back()))
        throw ShapeMismatch("output_grad shape does not match graph output");

    std::vector<Tensor> out_grads(graph.layers.size());
    Tensor input_grad(tape.input.shape);
    auto src = [&](int id) -> const Tensor& {
        return id < 0 ? tape.input : tape.outputs[size_t(id)];
    };
    auto add_grad = [&](int id, const Tensor& g) {
        Tensor& dst = id < 0 ? input_grad : out_grads[size_t(id)];
        if (dst.data.empty()) dst = Tensor(g.shape);
        for (size_t j = 0; j < g.size(); ++j) dst.data[j] += g.data[j];
    };

    out_grads.back() = output_grad;
    std::vector<LayerGrads> param_grads(graph.layers.size());

    for (size_t idx = graph.layers.size(); idx-- > 0;) {
        const LayerSpec& layer = graph.layers[idx];
        if (out_grads[idx].data.empty()) continue;  // output unused downstream
        const Tensor& go = out_grads[idx];
        const Tensor& x = src(layer.inputs[0]);
        switch (layer.kind) {
            case LayerKind::Conv1D: {
                Tensor gin, gw, gb;
                conv1d_backward(x, layer.weights, go, gin, gw, gb);
                param_grads[idx] = {std::move(gw), std::move(gb)};
                add_grad(layer.inputs[0], gin);
                break;
            }
            case LayerKind::Conv2D: {
                Tensor gin, gw, gb;
                conv2d_backward(x, layer.weights, go, gin, gw, gb);
                param_grads[idx] = {std::move(gw), std::move(gb)};
                add_grad(layer.inputs[0], gin);
                break;
            }
            case LayerKind::MaxPool1D:
            case LayerKind::MaxPool2D:
                add_grad(layer.inputs[0], maxpool_backward(x, go, tape.pool_argmax[idx]));
                break;
            case LayerKind::UpsampleNearest2D:
                add_grad(layer.inputs[0], upsample_nearest_backward(go));
                break;
            case LayerKind::Concat: {
                Tensor ga(src(layer.inputs[0]).shape), gb(src(layer.inputs[1]).shape);
                concat_backward(go, ga, gb);
                add_grad(layer.inputs[0], ga);
                add_grad(layer.inputs[1], gb);
                break;
            }
            case LayerKind::ReLU:
                add_grad(layer.inputs[0], relu_backward(tape.outputs[idx], go));
                break;
            case LayerKind::Dense: {
                Tensor gin, gw, gb;
                dense_backward(x, layer.weights, go, gin, gw, gb);
                param_grads[idx] = {std::move(gw), std::move(gb)};
                add_grad(layer.inputs[0], gin);
                break;
            }
            case LayerKind::Softmax:
                add_grad(layer.inputs[0], softmax_backward(tape.outputs[idx], go));
                break;
        }
    }
    if (grad_input) *grad_input = std::move(input_grad);
    return param_grads;
}

std::vector<std::vector<size_t>> layer_output_shapes(const ModelGraph& graph,
                                                     const std::vector<size_t>& input_shape) {
    check_wiring(graph);
    std::vector<std::vector<size_t>> shapes(graph.layers.size());
    auto src = [&](int id) -> const std::vector<size_t>& {
        return id < 0 ? input_shape : shapes[size_t(id)];
    };

    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& layer = graph.layers[i];
        const std::vector<size_t>& in = src(layer.inputs[0]);
        switch (layer.kind) {
            case LayerKind::Conv1D: {
                if (in.size() != 2 || in[1] != layer.in_channels)
                    throw ShapeMismatch("conv1d " + layer.name + " input shape");
                if (in[0] < layer.kernel)
                    throw InputTooShort("conv1d " + layer.name + ": length " +
                                        std::to_string(in[0]) + " < kernel " +
                                        std::to_string(layer.kernel));
                shapes[i] = {in[0] - layer.kernel + 1, layer.out_channels};
                break;
            }
            case LayerKind::Conv2D: {
                if (in.size() != 3 || in[2] != layer.in_channels)
                    throw ShapeMismatch("conv2d " + layer.name + " input shape");
                shapes[i] = {in[0], in[1], layer.out_channels};
                break;
            }
            case LayerKind::MaxPool1D: {
                if (in.size() != 2) throw ShapeMismatch("maxpool1d input rank");
                if (in[0] < 2) throw ExtentTooSmall("maxpool1d " + layer.name);
                shapes[i] = {in[0] / 2, in[1]};
                break;
            }
            case LayerKind::MaxPool2D: {
                if (in.size() != 3) throw ShapeMismatch("maxpool2d input rank");
                if (in[0] < 2 || in[1] < 2) throw ExtentTooSmall("maxpool2d " + layer.name);
                shapes[i] = {in[0] / 2, in[1] / 2, in[2]};
                break;
            }
            case LayerKind::UpsampleNearest2D: {
                if (in.size() != 3) throw ShapeMismatch("upsample input rank");
                shapes[i] = {2 * in[0], 2 * in[1], in[2]};
                break;
            }
            case LayerKind::Concat: {
                const std::vector<size_t>& other = src(layer.inputs[1]);
                if (in.size() != other.size()) throw ShapeMismatch("concat rank");
                for (size_t j = 0; j + 1 < in.size(); ++j)
                    if (in[j] != other[j]) throw ShapeMismatch("concat leading extents");
                shapes[i] = in;
                shapes[i].back() += other.back();
                break;
            }
            case LayerKind::ReLU:
                shapes[i] = in;
                break;
            case LayerKind::Dense: {
                size_t f = 1;
                for (size_t e : in) f *= e;
                if (f != layer.in_channels)
                    throw ShapeMismatch("dense " + layer.name + " expects " +
                                        std::to_string(layer.in_channels) + " features, got " +
                                        std::to_string(f));
                shapes[i] = {layer.out_channels};
                break;
            }
            case LayerKind::Softmax:
                shapes[i] = in;
                break;
        }
    }
    return shapes;
}

void init_weights(ModelGraph& graph, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (LayerSpec& layer : graph.layers) {
        if (!layer.learnable()) continue;
        double limit;
        if (layer.kind == LayerKind::Dense) {
            // Glorot-uniform
            limit = std::sqrt(6.0 / double(layer.in_channels + layer.out_channels));
        } else {
            // He-uniform over the conv fan-in
            size_t fan_in = layer.in_channels * layer.kernel;
            if (layer.kind == LayerKind::Conv2D) fan_in *= layer.kernel;
            limit = std::sqrt(6.0 / double(fan_in));
        }
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : layer.weights.data) w = dist(rng);
        std::fill(layer.bias.data.begin(), layer.bias.data.end(), 0.0);
    }
}

void save_manifest(const ModelGraph& graph, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    os << "model/1\n";
    os << "name " << graph.name << "\n";
    os << "input";
    for (size_t e : graph.input_shape) os << " " << e;
    os << "\n";
    os << "classes " << graph.class_count << "\n";
    os << "layers " << graph.layers.size() << "\n";
    for (const LayerSpec& layer : graph.layers) {
        os << "layer " << layer.name << " " << layer_kind_name(layer.kind) << " kernel="
           << layer.kernel << " in=" << layer.in_channels << " out=" << layer.out_channels
           << " pool=" << layer.pool << " inputs=";
        for (size_t j = 0; j < layer.inputs.size(); ++j)
            os << (j ? "," : "") << layer.inputs[j];
        os << "\n";
    }
    if (!os) throw IoFailure("short write to " + path.string());
}

ModelGraph load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoFailure("cannot open " + path.string());
    std::string line, key;
    if (!std::getline(is, line) || line != "model/1") throw BadMagic("not a model manifest");

    ModelGraph graph;
    if (!std::getline(is, line)) throw IoFailure("truncated manifest");
    {
        std::istringstream ls(line);
        ls >> key >> graph.name;
        if (key != "name") throw IoFailure("manifest: expected name");
    }
    if (!std::getline(is, line)) throw IoFailure("truncated manifest");
    {
        std::istringstream ls(line);
        ls >> key;
        if (key != "input") throw IoFailure("manifest: expected input");
        size_t e;
        while (ls >> e) graph.input_shape.push_back(e);
    }
    if (!std::getline(is, line)) throw IoFailure("truncated manifest");
    {
        std::istringstream ls(line);
        ls >> key >> graph.class_count;
        if (key != "classes") throw IoFailure("manifest: expected classes");
    }
    size_t layer_count = 0;
    if (!std::getline(is, line)) throw IoFailure("truncated manifest");
    {
        std::istringstream ls(line);
        ls >> key >> layer_count;
        if (key != "layers") throw IoFailure("manifest: expected layers");
    }

    for (size_t i = 0; i < layer_count; ++i) {
        if (!std::getline(is, line)) throw IoFailure("truncated manifest");
        std::istringstream ls(line);
        std::string kind_name;
        LayerSpec layer;
        ls >> key >> layer.name >> kind_name;
        if (key != "layer") throw IoFailure("manifest: expected layer line");
        layer.kind = layer_kind_from_name(kind_name);
        std::string field;
        while (ls >> field) {
            const size_t eq = field.find('=');
            if (eq == std::string::npos) throw IoFailure("manifest: malformed field " + field);
            const std::string fname = field.substr(0, eq);
            const std::string fval = field.substr(eq + 1);
            if (fname == "kernel") layer.kernel = std::stoull(fval);
            else if (fname == "in") layer.in_channels = std::stoull(fval);
            else if (fname == "out") layer.out_channels = std::stoull(fval);
            else if (fname == "pool") layer.pool = std::stoull(fval);
            else if (fname == "inputs") {
                std::istringstream vs(fval);
                std::string tok;
                while (std::getline(vs, tok, ',')) layer.inputs.push_back(std::stoi(tok));
            } else {
                throw IoFailure("manifest: unknown field " + fname);
            }
        }
        switch (layer.kind) {
            case LayerKind::Conv1D:
                layer.weights = Tensor({layer.kernel, layer.in_channels, layer.out_channels});
                layer.bias = Tensor({layer.out_channels});
                break;
            case LayerKind::Conv2D:
                layer.weights =
                    Tensor({layer.kernel, layer.kernel, layer.in_channels, layer.out_channels});
                layer.bias = Tensor({layer.out_channels});
                break;
            case LayerKind::Dense:
                layer.weights = Tensor({layer.in_channels, layer.out_channels});
                layer.bias = Tensor({layer.out_channels});
                break;
            default:
                break;
        }
        graph.layers.push_back(std::move(layer));
    }
    check_wiring(graph);
    return graph;
}

}  // namespace hypercloud
