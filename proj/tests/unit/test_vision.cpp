#include <doctest.h>

#include <random>

#include "neurotrail/error.hpp"
#include "neurotrail/vision.hpp"

using namespace neurotrail;
using namespace neurotrail::vision;

namespace {

RgbImage uniform(int w, int h, uint8_t v) {
    RgbImage img(w, h);
    std::fill(img.pixels.begin(), img.pixels.end(), v);
    return img;
}

RgbImage random_image(int w, int h, std::mt19937_64& rng) {
    RgbImage img(w, h);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng());
    return img;
}

LayerSpec random_host_layer(std::mt19937_64& rng, int features) {
    LayerSpec l;
    l.kind = LayerKind::HostConv;
    l.kh = l.kw = 3;
    l.padding = 1;
    l.in_features = 3;
    l.out_features = features;
    l.weights.resize(static_cast<size_t>(features) * 27);
    for (auto& w : l.weights) w = static_cast<int8_t>(static_cast<int>(rng() % 3) - 1);
    for (int o = 0; o < features; ++o) l.thresholds.push_back(static_cast<int32_t>(rng() % 401) - 200);
    return l;
}

// Straightforward pad-same convolution over centered pixels.
bool oracle_spike(const RgbImage& img, const LayerSpec& l, int x, int y, int o) {
    long sum = 0;
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            for (int c = 0; c < 3; ++c) {
                const int ix = x + kx - 1, iy = y + ky - 1;
                if (ix < 0 || iy < 0 || ix >= img.width || iy >= img.height) continue;
                sum += l.weights[((o * 3 + ky) * 3 + kx) * 3 + c] * (static_cast<int>(img.at(ix, iy)[c]) - 128);
            }
    return sum > l.thresholds[o];
}

}  // namespace

TEST_CASE("downsample preserves a constant frame") {
    const RgbImage out = downsample(uniform(176, 144, 128));
    CHECK(out.width == 44);
    CHECK(out.height == 36);
    for (uint8_t v : out.pixels) CHECK(v == 128);
}

TEST_CASE("downsample averages 4x4 blocks rounding half up") {
    RgbImage f = uniform(176, 144, 0);
    f.at(3, 3)[0] = 255;  // (255 + 8) / 16 = 16
    f.at(4, 0)[1] = 8;    // (8 + 8) / 16 = 1, exactly half rounds up
    f.at(8, 0)[2] = 7;    // (7 + 8) / 16 = 0
    const RgbImage out = downsample(f);
    CHECK(out.at(0, 0)[0] == 16);
    CHECK(out.at(1, 0)[1] == 1);
    CHECK(out.at(2, 0)[2] == 0);
    CHECK(out.at(0, 0)[1] == 0);
}

TEST_CASE("downsample matches a block-average oracle on random frames") {
    std::mt19937_64 rng(3);
    const RgbImage f = random_image(176, 144, rng);
    const RgbImage out = downsample(f);
    for (int y = 0; y < 36; ++y)
        for (int x = 0; x < 44; ++x)
            for (int c = 0; c < 3; ++c) {
                int sum = 0;
                for (int dy = 0; dy < 4; ++dy)
                    for (int dx = 0; dx < 4; ++dx) sum += f.at(4 * x + dx, 4 * y + dy)[c];
                REQUIRE(out.at(x, y)[c] == (sum + 8) / 16);
            }
}

TEST_CASE("downsample rejects other frame sizes") {
    CHECK_THROWS_AS(downsample(uniform(160, 120, 0)), ShapeError);
    CHECK_THROWS_AS(downsample(RgbImage{}), ShapeError);
}

TEST_CASE("zero image with zero thresholds gives no spikes") {
    LayerSpec l;
    l.kind = LayerKind::HostConv;
    l.kh = l.kw = 3;
    l.padding = 1;
    l.in_features = 3;
    l.out_features = 4;
    l.weights.assign(4 * 27, 1);
    l.thresholds.assign(4, 0);
    // Centered value 0 everywhere.
    const SpikePlane p = host_conv_threshold(uniform(44, 36, 128), l);
    CHECK(p.count() == 0);
    CHECK(p.bit_count() == 44u * 36u * 4u);
}

TEST_CASE("center-tap kernel spikes only at a bright pixel") {
    LayerSpec l;
    l.kind = LayerKind::HostConv;
    l.kh = l.kw = 3;
    l.padding = 1;
    l.in_features = 3;
    l.out_features = 1;
    l.weights.assign(27, 0);
    l.weights[(1 * 3 + 1) * 3 + 0] = 1;  // red channel, center tap
    l.thresholds.assign(1, 0);
    RgbImage img = uniform(44, 36, 128);
    img.at(10, 20)[0] = 255;
    const SpikePlane p = host_conv_threshold(img, l);
    CHECK(p.count() == 1);
    CHECK(p.get(10, 20, 0));
}

TEST_CASE("host convolution matches a scalar oracle on every ISA") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const RgbImage img = random_image(44, 36, rng);
        const LayerSpec l = random_host_layer(rng, 12);
        for (simd::Isa isa : simd::supported_isas()) {
            const SpikePlane p = host_conv_threshold(img, l, isa);
            for (int o = 0; o < 12; ++o)
                for (int y = 0; y < 36; ++y)
                    for (int x = 0; x < 44; ++x) REQUIRE(p.get(x, y, o) == oracle_spike(img, l, x, y, o));
        }
    }
}

TEST_CASE("host convolution rejects a layer that is not 3-channel") {
    std::mt19937_64 rng(1);
    LayerSpec l = random_host_layer(rng, 4);
    l.in_features = 4;
    CHECK_THROWS_AS(host_conv_threshold(uniform(44, 36, 0), l), ShapeError);
    LayerSpec short_weights = random_host_layer(rng, 4);
    short_weights.weights.pop_back();
    CHECK_THROWS(host_conv_threshold(uniform(44, 36, 0), short_weights));
}

TEST_CASE("xyf events") {
    SUBCASE("empty plane gives no events") { CHECK(to_xyf(SpikePlane({44, 36, 12})).empty()); }
    SUBCASE("full plane gives one event per neuron") {
        SpikePlane p({44, 36, 12});
        for (int f = 0; f < 12; ++f)
            for (int y = 0; y < 36; ++y)
                for (int x = 0; x < 44; ++x) p.set(x, y, f);
        CHECK(to_xyf(p).size() == 19008u);
    }
    SUBCASE("round trip and (f, y, x) order") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            SpikePlane p({44, 36, 12});
            for (int i = 0; i < 500; ++i) p.set(rng() % 44, rng() % 36, rng() % 12);
            const auto ev = to_xyf(p);
            CHECK(ev.size() == p.count());
            for (size_t i = 1; i < ev.size(); ++i) {
                const auto key = [](const SpikeEvent& e) { return (e.f * 1000 + e.y) * 1000 + e.x; };
                REQUIRE(key(ev[i - 1]) < key(ev[i]));
            }
            CHECK(from_xyf(ev, p.shape()) == p);
        }
    }
    SUBCASE("out-of-range event") {
        CHECK_THROWS_AS(from_xyf({{44, 0, 0}}, Shape3{44, 36, 12}), RangeError);
    }
}

TEST_CASE("preprocess stays within the input volume and is deterministic") {
    std::mt19937_64 rng(8);
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 4);
    for (int trial = 0; trial < 5; ++trial) {
        const RgbImage f = random_image(176, 144, rng);
        const auto a = preprocess(f, spec);
        const auto b = preprocess(f, spec);
        CHECK(a == b);
        for (const auto& e : a) REQUIRE(Shape3{44, 36, 12}.contains(e.x, e.y, e.f));
    }
}

TEST_CASE("raw frame container round trip") {
    std::mt19937_64 rng(2);
    const RgbImage img = random_image(176, 144, rng);
    const auto bytes = encode_raw_frame(img);
    CHECK(bytes.size() == 8u + 176u * 144u * 3u);
    CHECK(bytes[0] == 176);
    CHECK(bytes[2] == 144);
    CHECK(decode_raw_frame(bytes) == img);
    CHECK_THROWS(decode_raw_frame(std::span(bytes).first(bytes.size() - 1)));
}
