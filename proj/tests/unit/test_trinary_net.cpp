#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "neurotrail/error.hpp"
#include "neurotrail/trinary_net.hpp"

using namespace neurotrail;

namespace {

TrinaryNetworkSpec single_neuron(std::vector<int8_t> w, int32_t theta) {
    TrinaryNetworkSpec spec;
    spec.input_shape = {1, 1, static_cast<int>(w.size())};
    LayerSpec l;
    l.kind = LayerKind::CoreClassifier;
    l.kh = l.kw = 1;
    l.in_features = static_cast<int>(w.size());
    l.out_features = 1;
    l.weights = std::move(w);
    l.thresholds = {theta};
    spec.layers.push_back(l);
    spec.class_populations = {{0}};
    return spec;
}

}  // namespace

TEST_CASE("hand arithmetic: (+1,+1,-1) . (1,1,1) = 1 > 0 spikes") {
    const auto spec = single_neuron({1, 1, -1}, 0);
    BinaryTensor in(spec.input_shape);
    in.bits = {1, 1, 1};
    CHECK(forward(spec, in).histogram.counts == std::vector<uint32_t>{1});
    const auto strict = single_neuron({1, 1, -1}, 1);
    CHECK(forward(strict, in).histogram.counts == std::vector<uint32_t>{0});
}

TEST_CASE("all-zero input with non-negative thresholds is silent") {
    auto spec = make_default_architecture();
    randomize(spec, 1, 0, 2);
    const auto r = forward(spec, BinaryTensor(spec.core_input_shape()));
    CHECK(r.histogram.counts == std::vector<uint32_t>{0, 0, 0});
    for (const auto& t : r.layer_spikes)
        for (auto b : t.bits) CHECK(b == 0);
}

TEST_CASE("reference forward equals the brute-force oracle on 1000 random nets") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto spec = oracle::random_small_net(rng);
        const auto in = oracle::random_tensor(spec.input_shape, rng, 0.5);
        const auto r = forward(spec, in);
        REQUIRE(r.histogram.counts == oracle::dense_histogram(spec, in));
        BinaryTensor x = in;
        for (size_t l = 0; l < spec.layers.size(); ++l) {
            x = oracle::dense_layer(spec.layers[l], x);
            CHECK(r.layer_spikes[l] == x);
        }
    }
}

TEST_CASE("forward is deterministic and ISA independent on the default net") {
    std::mt19937_64 rng(7);
    auto spec = make_default_architecture();
    randomize(spec, 7);
    const auto in = oracle::random_tensor(spec.core_input_shape(), rng, 0.3);
    const ReferenceNet scalar(spec, simd::Isa::Scalar);
    const auto ref = scalar.forward(in);
    CHECK(ref.histogram.counts == oracle::dense_histogram(spec, in));
    for (auto isa : simd::supported_isas()) {
        const ReferenceNet net(spec, isa);
        const auto r = net.forward(in);
        CHECK(r.histogram == ref.histogram);
        CHECK(r.layer_spikes == ref.layer_spikes);
    }
}

TEST_CASE("forward rejects wrong shapes and non-binary input") {
    auto spec = make_default_architecture();
    CHECK_THROWS_AS(forward(spec, BinaryTensor(Shape3{44, 36, 3})), ShapeError);
    BinaryTensor in(spec.core_input_shape());
    in.bits[5] = 2;
    CHECK_THROWS_AS(forward(spec, in), ValidationError);
}

TEST_CASE("raising a threshold never adds spikes") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto spec = oracle::random_small_net(rng);
        const auto in = oracle::random_tensor(spec.input_shape, rng, 0.5);
        auto raised = spec;
        const size_t l = rng() % spec.layers.size();
        for (auto& t : raised.layers[l].thresholds) t += static_cast<int32_t>(rng() % 3);
        const auto a = forward(spec, in);
        const auto b = forward(raised, in);
        for (size_t i = 0; i < a.layer_spikes[l].bits.size(); ++i)
            CHECK(b.layer_spikes[l].bits[i] <= a.layer_spikes[l].bits[i]);
    }
}

TEST_CASE("activations are binary over random nets") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto spec = oracle::random_small_net(rng);
        for (const auto& t : forward(spec, oracle::random_tensor(spec.input_shape, rng, 0.5)).layer_spikes)
            for (auto b : t.bits) CHECK(b <= 1);
    }
}

TEST_CASE("trinarize follows the tau rule") {
    const std::vector<float> w{0.9f, -0.9f, 0.01f};
    // tau = 0.7 * (0.9 + 0.9 + 0.01) / 3 = 0.4223
    CHECK(trinarize(w, 0.7f) == std::vector<int8_t>{1, -1, 0});
    CHECK(trinarize(std::vector<float>(5, 0.0f), 0.7f) == std::vector<int8_t>(5, 0));
    CHECK_THROWS_AS(trinarize(w, 1.0f), ValidationError);
    CHECK_THROWS_AS(trinarize(w, 0.0f), ValidationError);

    std::mt19937_64 rng(3);
    std::normal_distribution<float> nd(0, 1);
    std::vector<float> r(1000);
    for (auto& v : r) v = nd(rng);
    const auto t = trinarize(r, 0.7f);
    double mean_abs = 0;
    for (float v : r) mean_abs += std::fabs(v);
    const double tau = 0.7 * mean_abs / r.size();
    for (size_t i = 0; i < r.size(); ++i) {
        CHECK(t[i] >= -1);
        CHECK(t[i] <= 1);
        CHECK(t[i] == (r[i] > tau ? 1 : (r[i] < -tau ? -1 : 0)));
    }
    // Already-trinary tensors are fixed points.
    std::vector<float> tf(t.begin(), t.end());
    CHECK(trinarize(tf, 0.7f) == t);
}

TEST_CASE("default architecture shapes and populations") {
    const auto spec = make_default_architecture();
    REQUIRE(spec.layers.size() == 5);
    CHECK(spec.core_input_shape() == Shape3{44, 36, 12});
    CHECK(spec.layer_output_shape(1) == Shape3{22, 18, 16});
    CHECK(spec.layer_output_shape(2) == Shape3{11, 9, 32});
    CHECK(spec.layer_output_shape(3) == Shape3{6, 5, 64});
    CHECK(spec.output_shape() == Shape3{1, 5, 18});
    CHECK(spec.layers[3].fan_in() == 3 * 3 * 16);
    CHECK(spec.layers[4].fan_in() == 6 * 32);
    for (size_t i = 1; i < spec.layers.size(); ++i) CHECK(spec.layers[i].fan_in() <= kMaxFanIn);
    REQUIRE(spec.class_populations.size() == 3);
    for (const auto& p : spec.class_populations) CHECK(p.size() == 30);
    // Feature f votes for class f % 3, one neuron per row.
    const Shape3 out = spec.output_shape();
    for (int c = 0; c < 3; ++c)
        for (uint32_t id : spec.class_populations[c]) CHECK(static_cast<int>(id / out.height) % 3 == c);
    CHECK(!spec.lint().empty());  // untrained weights are all zero
}

TEST_CASE("classifier population sizes must tile the rows") {
    ArchitectureOptions opt;
    opt.neurons_per_class = 20;  // 60 neurons over 5 rows: 12 per row, 6 per group, 2 per class
    const auto spec = make_default_architecture(opt);
    for (const auto& p : spec.class_populations) CHECK(p.size() == 20);
    opt.neurons_per_class = 31;
    CHECK_THROWS_AS(make_default_architecture(opt), ValidationError);
}

TEST_CASE("validation catches broken invariants") {
    auto spec = make_default_architecture();
    randomize(spec, 1);
    CHECK(spec.lint().empty());
    auto bad = spec;
    bad.layers[2].weights[0] = 2;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = spec;
    bad.class_populations[0].clear();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = spec;
    bad.class_populations[1].push_back(bad.class_populations[0][0]);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = spec;
    bad.layers[3].feature_groups = 1;
    bad.layers[3].weights.resize(static_cast<size_t>(64) * 9 * 32);
    CHECK_THROWS_AS(bad.validate(), ValidationError);  // fan-in 288
    bad = spec;
    bad.layers[2].in_features = 15;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("model file roundtrip and error cases") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto spec = oracle::random_small_net(rng);
        CHECK(deserialize_spec(serialize_spec(spec)) == spec);
    }
    auto spec = make_default_architecture();
    randomize(spec, 2, -100000, 100000);
    const auto bytes = serialize_spec(spec);
    CHECK(deserialize_spec(bytes) == spec);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "TNET");

    for (size_t cut : {size_t{0}, size_t{3}, size_t{10}, bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(deserialize_spec(std::span(bytes).first(cut)), ParseError);

    auto v2 = bytes;
    v2[4] = 2;
    CHECK_THROWS_AS(deserialize_spec(v2), UnsupportedVersionError);

    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_spec(extra), ParseError);
}

TEST_CASE("a packed weight code of 3 is a validation error") {
    const auto spec = single_neuron({1, 0, -1}, 0);
    auto bytes = serialize_spec(spec);
    // Header 4+2+6+2, layer header 5+6, one threshold, weight count, then one packed byte.
    const size_t packed = 14 + 11 + 4 + 4;
    REQUIRE(bytes[packed] == (0b01 | (0b00 << 2) | (0b10 << 4)));
    bytes[packed] = 0b11;
    CHECK_THROWS_AS(deserialize_spec(bytes), ValidationError);
}

TEST_CASE("save and load through a file") {
    auto spec = make_default_architecture();
    randomize(spec, 8);
    const std::string path = "test_trinary_net_model.tnet";
    save_spec(spec, path);
    CHECK(load_spec(path) == spec);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_spec("does/not/exist.tnet"), IoError);
}
