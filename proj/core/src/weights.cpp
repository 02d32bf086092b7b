#include "hypercloud/weights.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "hypercloud/errors.hpp"

namespace hypercloud {
namespace {

constexpr char kMagic[4] = {'W', 'G', 'T', '1'};
constexpr uint16_t kVersion = 1;

struct Entry {
    std::string name;
    Tensor* tensor;
};

std::vector<Entry> learnable_tensors(ModelGraph& graph) {
    std::vector<Entry> entries;
    for (LayerSpec& layer : graph.layers) {
        if (!layer.learnable()) continue;
        entries.push_back({layer.name + ".weight", &layer.weights});
        entries.push_back({layer.name + ".bias", &layer.bias});
    }
    return entries;
}

void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

bool read_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    return is.gcount() == std::streamsize(n);
}

}  // namespace

void save_weights(const ModelGraph& graph, std::ostream& os) {
    auto entries = learnable_tensors(const_cast<ModelGraph&>(graph));
    write_bytes(os, kMagic, 4);
    write_bytes(os, &kVersion, 2);
    const uint32_t count = uint32_t(entries.size());
    write_bytes(os, &count, 4);
    for (const Entry& entry : entries) {
        const uint16_t name_len = uint16_t(entry.name.size());
        write_bytes(os, &name_len, 2);
        write_bytes(os, entry.name.data(), name_len);
        const uint8_t rank = uint8_t(entry.tensor->rank());
        write_bytes(os, &rank, 1);
        const uint32_t elems = uint32_t(entry.tensor->size());
        write_bytes(os, &elems, 4);
        for (size_t e : entry.tensor->shape) {
            const uint32_t extent = uint32_t(e);
            write_bytes(os, &extent, 4);
        }
        for (double v : entry.tensor->data) {
            const float f = float(v);
            write_bytes(os, &f, 4);
        }
    }
}

void save_weights(const ModelGraph& graph, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    save_weights(graph, os);
    if (!os) throw IoFailure("short write to " + path.string());
}

void load_weights(ModelGraph& graph, std::istream& is) {
    char magic[4];
    if (!read_bytes(is, magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw BadMagic("not a weight file");
    uint16_t version = 0;
    if (!read_bytes(is, &version, 2) || version != kVersion)
        throw BadMagic("unsupported weight file version");

    auto entries = learnable_tensors(graph);
    uint32_t count = 0;
    if (!read_bytes(is, &count, 4)) throw ShapeMismatch("truncated weight file");
    if (count != entries.size())
        throw ShapeMismatch("weight file holds " + std::to_string(count) + " tensors, model has " +
                            std::to_string(entries.size()));

    for (Entry& entry : entries) {
        uint16_t name_len = 0;
        if (!read_bytes(is, &name_len, 2)) throw ShapeMismatch("truncated weight file");
        std::string name(name_len, '\0');
        if (!read_bytes(is, name.data(), name_len)) throw ShapeMismatch("truncated weight file");
        if (name != entry.name)
            throw ShapeMismatch("expected tensor " + entry.name + ", found " + name);
        uint8_t rank = 0;
        uint32_t elems = 0;
        if (!read_bytes(is, &rank, 1) || !read_bytes(is, &elems, 4))
            throw ShapeMismatch("truncated weight file");
        if (rank != entry.tensor->rank())
            throw ShapeMismatch("tensor " + name + " rank mismatch");
        for (size_t axis = 0; axis < rank; ++axis) {
            uint32_t extent = 0;
            if (!read_bytes(is, &extent, 4)) throw ShapeMismatch("truncated weight file");
            if (extent != entry.tensor->shape[axis])
                throw ShapeMismatch("tensor " + name + " extent mismatch on axis " +
                                    std::to_string(axis));
        }
        if (elems != entry.tensor->size())
            throw ShapeMismatch("tensor " + name + " element count mismatch");
        for (size_t i = 0; i < elems; ++i) {
            float f = 0.0f;
            if (!read_bytes(is, &f, 4)) throw ShapeMismatch("truncated weight payload");
            entry.tensor->data[i] = double(f);
        }
    }
    if (is.peek() != std::char_traits<char>::eof())
        throw ShapeMismatch("trailing bytes after weight payload");
}

void load_weights(ModelGraph& graph, const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoFailure("cannot open " + path.string());
    load_weights(graph, is);
}

size_t serialized_weight_bytes(const ModelGraph& graph) {
    std::ostringstream os(std::ios::binary);
    save_weights(graph, os);
    return os.str().size();
}

}  // namespace hypercloud
