#include <cstring>

#include "neurotrail/bytes.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/trinary_net.hpp"

namespace neurotrail {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'E', 'T'};

// 2-bit codes, four per byte, least significant pair first.
uint8_t encode_weight(int8_t w) { return w == 0 ? 0 : (w > 0 ? 1 : 2); }

void put_u8_checked(ByteWriter& w, int v, const char* what) {
    if (v < 0 || v > 255) throw ValidationError(std::string(what) + " does not fit the model format");
    w.u8(static_cast<uint8_t>(v));
}

void put_u16_checked(ByteWriter& w, int v, const char* what) {
    if (v < 0 || v > 65535) throw ValidationError(std::string(what) + " does not fit the model format");
    w.u16(static_cast<uint16_t>(v));
}

}  // namespace

std::vector<uint8_t> serialize_spec(const TrinaryNetworkSpec& spec) {
    spec.validate();
    ByteWriter w;
    w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
    w.u16(kModelFormatVersion);
    put_u16_checked(w, spec.input_shape.width, "input width");
    put_u16_checked(w, spec.input_shape.height, "input height");
    put_u16_checked(w, spec.input_shape.features, "input features");
    put_u16_checked(w, static_cast<int>(spec.layers.size()), "layer count");
    for (const LayerSpec& l : spec.layers) {
        w.u8(static_cast<uint8_t>(l.kind));
        put_u8_checked(w, l.kh, "kernel height");
        put_u8_checked(w, l.kw, "kernel width");
        put_u8_checked(w, l.stride, "stride");
        put_u8_checked(w, l.padding, "padding");
        put_u16_checked(w, l.in_features, "in_features");
        put_u16_checked(w, l.out_features, "out_features");
        put_u16_checked(w, l.feature_groups, "feature_groups");
        for (int32_t t : l.thresholds) w.i32(t);
        w.u32(static_cast<uint32_t>(l.weights.size()));
        for (size_t i = 0; i < l.weights.size(); i += 4) {
            uint8_t packed = 0;
            for (size_t k = 0; k < 4 && i + k < l.weights.size(); ++k)
                packed |= static_cast<uint8_t>(encode_weight(l.weights[i + k]) << (2 * k));
            w.u8(packed);
        }
    }
    put_u16_checked(w, static_cast<int>(spec.class_populations.size()), "class count");
    for (const auto& pop : spec.class_populations) {
        w.u32(static_cast<uint32_t>(pop.size()));
        for (uint32_t id : pop) w.u32(id);
    }
    return w.take();
}

TrinaryNetworkSpec deserialize_spec(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("not a TNET model file");
    const uint16_t version = r.u16();
    if (version != kModelFormatVersion)
        throw UnsupportedVersionError("model format version " + std::to_string(version) +
                                      " is not supported (expected " +
                                      std::to_string(kModelFormatVersion) + ")");
    TrinaryNetworkSpec spec;
    spec.input_shape.width = r.u16();
    spec.input_shape.height = r.u16();
    spec.input_shape.features = r.u16();
    const uint16_t n_layers = r.u16();
    for (uint16_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        const uint8_t kind = r.u8();
        if (kind > static_cast<uint8_t>(LayerKind::CoreClassifier))
            throw ParseError("unknown layer kind " + std::to_string(kind));
        l.kind = static_cast<LayerKind>(kind);
        l.kh = r.u8();
        l.kw = r.u8();
        l.stride = r.u8();
        l.padding = r.u8();
        l.in_features = r.u16();
        l.out_features = r.u16();
        l.feature_groups = r.u16();
        l.thresholds.resize(l.out_features);
        for (auto& t : l.thresholds) t = r.i32();
        const uint32_t n_weights = r.u32();
        if (n_weights > r.remaining() * 4) throw ParseError("truncated weight tensor");
        auto packed = r.bytes((n_weights + 3) / 4);
        l.weights.resize(n_weights);
        for (uint32_t k = 0; k < n_weights; ++k) {
            const uint8_t code = (packed[k / 4] >> (2 * (k % 4))) & 3;
            if (code == 3)
                throw ValidationError("layer " + std::to_string(i) + ": invalid weight code at index " +
                                      std::to_string(k));
            l.weights[k] = code == 0 ? 0 : (code == 1 ? 1 : -1);
        }
        spec.layers.push_back(std::move(l));
    }
    const uint16_t n_classes = r.u16();
    for (uint16_t c = 0; c < n_classes; ++c) {
        const uint32_t n = r.u32();
        if (n > r.remaining() / 4) throw ParseError("truncated class population");
        std::vector<uint32_t> pop(n);
        for (auto& id : pop) id = r.u32();
        spec.class_populations.push_back(std::move(pop));
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after model");
    spec.validate();
    return spec;
}

void save_spec(const TrinaryNetworkSpec& spec, const std::string& path) {
    write_file_bytes(path, serialize_spec(spec));
}

TrinaryNetworkSpec load_spec(const std::string& path) { return deserialize_spec(read_file_bytes(path)); }

}  // namespace neurotrail
