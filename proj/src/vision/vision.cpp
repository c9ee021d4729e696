#include <bit>

#include "neurotrail/error.hpp"
#include "neurotrail/vision.hpp"

namespace neurotrail::vision {

RgbImage downsample(const RgbImage& frame) {
    if (frame.width != kFrameWidth || frame.height != kFrameHeight ||
        frame.pixels.size() != static_cast<size_t>(kFrameWidth) * kFrameHeight * 3)
        throw ShapeError("expected a " + std::to_string(kFrameWidth) + "x" + std::to_string(kFrameHeight) +
                         " frame, got " + std::to_string(frame.width) + "x" + std::to_string(frame.height));
    RgbImage out(kNetWidth, kNetHeight);
    for (int y = 0; y < kNetHeight; ++y) {
        for (int x = 0; x < kNetWidth; ++x) {
            unsigned sum[3] = {0, 0, 0};
            for (int dy = 0; dy < kScale; ++dy) {
                const uint8_t* row = frame.at(x * kScale, y * kScale + dy);
                for (int dx = 0; dx < kScale * 3; dx += 3) {
                    sum[0] += row[dx];
                    sum[1] += row[dx + 1];
                    sum[2] += row[dx + 2];
                }
            }
            uint8_t* px = out.at(x, y);
            for (int c = 0; c < 3; ++c) px[c] = static_cast<uint8_t>((sum[c] + 8) / 16);
        }
    }
    return out;
}

size_t SpikePlane::count() const {
    size_t n = 0;
    for (uint64_t w : words_) n += static_cast<size_t>(std::popcount(w));
    return n;
}

BinaryTensor SpikePlane::to_tensor() const {
    BinaryTensor t(shape_);
    for (size_t i = 0; i < t.bits.size(); ++i) t.bits[i] = (words_[i / 64] >> (i % 64)) & 1;
    return t;
}

SpikePlane SpikePlane::from_tensor(const BinaryTensor& t) {
    SpikePlane p(t.shape);
    for (size_t i = 0; i < t.bits.size(); ++i)
        if (t.bits[i]) p.words_[i / 64] |= uint64_t{1} << (i % 64);
    return p;
}

std::vector<int16_t> centered_planes(const RgbImage& img, int pad) {
    const int pw = img.width + 2 * pad;
    const int ph = img.height + 2 * pad;
    std::vector<int16_t> out(static_cast<size_t>(3) * pw * ph, 0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out[(static_cast<size_t>(c) * ph + y + pad) * pw + x + pad] =
                    static_cast<int16_t>(img.at(x, y)[c] - 128);
    return out;
}

std::vector<int32_t> host_conv_responses(const RgbImage& img, const LayerSpec& layer0, simd::Isa isa) {
    if (layer0.kind != LayerKind::HostConv || layer0.in_features != 3 || layer0.kh != layer0.kw ||
        layer0.kh % 2 == 0 || layer0.stride != 1 || layer0.feature_groups != 1 || layer0.fan_in() > 255 ||
        layer0.weights.size() != static_cast<size_t>(layer0.out_features) * layer0.fan_in())
        throw ShapeError("layer is not a valid 3-channel host convolution");
    if (img.pixels.size() != static_cast<size_t>(img.width) * img.height * 3)
        throw ShapeError("image buffer does not match its dimensions");
    const int pad = layer0.kh / 2;
    const auto planes = centered_planes(img, pad);
    simd::ConvGeometry g{img.width, img.height, 3, layer0.out_features, layer0.kh, layer0.kw};
    std::vector<int32_t> out(static_cast<size_t>(g.features) * g.width * g.height);
    simd::trinary_conv_i16(isa, g, planes.data(), layer0.weights.data(), out.data());
    return out;
}

SpikePlane host_conv_threshold(const RgbImage& img, const LayerSpec& layer0, simd::Isa isa) {
    const auto resp = host_conv_responses(img, layer0, isa);
    SpikePlane plane({img.width, img.height, layer0.out_features});
    size_t i = 0;
    for (int f = 0; f < layer0.out_features; ++f)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x, ++i)
                if (resp[i] > layer0.thresholds[f]) plane.set(x, y, f);
    return plane;
}

std::vector<SpikeEvent> to_xyf(const SpikePlane& plane) {
    std::vector<SpikeEvent> out;
    out.reserve(plane.count());
    const Shape3& s = plane.shape();
    const auto& words = plane.words();
    for (size_t w = 0; w < words.size(); ++w) {
        uint64_t bits = words[w];
        while (bits) {
            const size_t i = w * 64 + static_cast<size_t>(std::countr_zero(bits));
            bits &= bits - 1;
            const size_t x = i % s.width;
            const size_t y = (i / s.width) % s.height;
            const size_t f = i / (static_cast<size_t>(s.width) * s.height);
            out.push_back({static_cast<uint16_t>(x), static_cast<uint16_t>(y), static_cast<uint16_t>(f)});
        }
    }
    return out;
}

SpikePlane from_xyf(const std::vector<SpikeEvent>& events, Shape3 shape) {
    SpikePlane plane(shape);
    for (const auto& e : events) {
        if (!shape.contains(e.x, e.y, e.f))
            throw RangeError("spike (" + std::to_string(e.x) + ", " + std::to_string(e.y) + ", " +
                             std::to_string(e.f) + ") outside " + to_string(shape));
        plane.set(e.x, e.y, e.f);
    }
    return plane;
}

std::vector<SpikeEvent> preprocess(const RgbImage& frame, const TrinaryNetworkSpec& spec) {
    if (!spec.has_host_layer()) throw ShapeError("network has no host layer to preprocess with");
    return to_xyf(host_conv_threshold(downsample(frame), spec.layers.front()));
}

}  // namespace neurotrail::vision
