#pragma once

#include <cstdint>
#include <vector>

#include "neurotrail/image.hpp"
#include "neurotrail/simd.hpp"
#include "neurotrail/trinary_net.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail::vision {

inline constexpr int kFrameWidth = 176;
inline constexpr int kFrameHeight = 144;
inline constexpr int kScale = 4;
inline constexpr int kNetWidth = kFrameWidth / kScale;    // 44
inline constexpr int kNetHeight = kFrameHeight / kScale;  // 36

struct Frame {
    RgbImage image;
    int64_t timestamp_ms = 0;
};

// Exact 4x4 box average per channel, rounding half up: (sum + 8) / 16.
RgbImage downsample(const RgbImage& frame);

// Bit-packed spike volume in flat Shape3 order.
class SpikePlane {
public:
    SpikePlane() = default;
    explicit SpikePlane(Shape3 shape) : shape_(shape), words_((shape.size() + 63) / 64, 0) {}

    const Shape3& shape() const { return shape_; }
    bool get(int x, int y, int f) const {
        const size_t i = shape_.index(x, y, f);
        return (words_[i / 64] >> (i % 64)) & 1;
    }
    void set(int x, int y, int f, bool v = true) {
        const size_t i = shape_.index(x, y, f);
        if (v) words_[i / 64] |= uint64_t{1} << (i % 64);
        else words_[i / 64] &= ~(uint64_t{1} << (i % 64));
    }
    size_t count() const;
    size_t bit_count() const { return shape_.size(); }
    const std::vector<uint64_t>& words() const { return words_; }

    BinaryTensor to_tensor() const;
    static SpikePlane from_tensor(const BinaryTensor& t);

    friend bool operator==(const SpikePlane&, const SpikePlane&) = default;

private:
    Shape3 shape_;
    std::vector<uint64_t> words_;
};

// Pixel values shifted to [-128, 127], channel-planar, zero-padded by `pad`
// on every side.
std::vector<int16_t> centered_planes(const RgbImage& img, int pad);

// Integer responses of the host convolution, [features][h][w].
std::vector<int32_t> host_conv_responses(const RgbImage& img, const LayerSpec& layer0,
                                         simd::Isa isa = simd::active_isa());

// Spike iff the host convolution response exceeds the feature threshold.
SpikePlane host_conv_threshold(const RgbImage& img, const LayerSpec& layer0,
                               simd::Isa isa = simd::active_isa());

// One event per set bit in (f, y, x) order.
std::vector<SpikeEvent> to_xyf(const SpikePlane& plane);
// Throws RangeError for an event outside `shape`.
SpikePlane from_xyf(const std::vector<SpikeEvent>& events, Shape3 shape);

// Full host-side path: 176x144 frame -> downsample -> host conv -> events.
std::vector<SpikeEvent> preprocess(const RgbImage& frame, const TrinaryNetworkSpec& spec);

}  // namespace neurotrail::vision
