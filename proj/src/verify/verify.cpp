#include <algorithm>
#include <chrono>
#include <cmath>

#include "neurotrail/chip_sim.hpp"
#include "neurotrail/corelet.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/train.hpp"
#include "neurotrail/verify.hpp"
#include "neurotrail/vision.hpp"

namespace neurotrail::verify {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

BinaryTensor random_input(Shape3 shape, std::mt19937_64& rng) {
    BinaryTensor t(shape);
    const double density = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
    std::bernoulli_distribution bit(density);
    for (auto& b : t.bits) b = bit(rng) ? 1 : 0;
    return t;
}

std::vector<SpikeEvent> events_of(const BinaryTensor& t) {
    std::vector<SpikeEvent> ev;
    for (int f = 0; f < t.shape.features; ++f)
        for (int y = 0; y < t.shape.height; ++y)
            for (int x = 0; x < t.shape.width; ++x)
                if (t.at(x, y, f)) ev.push_back({static_cast<uint16_t>(x), static_cast<uint16_t>(y), static_cast<uint16_t>(f)});
    return ev;
}

void append_utf8(std::string& s, uint32_t cp) {
    if (cp < 0x80) {
        s += static_cast<char>(cp);
    } else if (cp < 0x800) {
        s += static_cast<char>(0xC0 | (cp >> 6));
        s += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        s += static_cast<char>(0xE0 | (cp >> 12));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        s += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        s += static_cast<char>(0xF0 | (cp >> 18));
        s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        s += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

}  // namespace

TrinaryNetworkSpec random_small_network(std::mt19937_64& rng) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    TrinaryNetworkSpec spec;
    spec.input_shape = {pick(2, 9), pick(2, 9), pick(1, 4)};
    Shape3 cur = spec.input_shape;
    const int layers = pick(1, 3);
    for (int i = 0; i < layers; ++i) {
        LayerSpec l;
        l.kind = i + 1 == layers && pick(0, 1) ? LayerKind::CoreClassifier : LayerKind::CoreConv;
        l.in_features = cur.features;
        do {
            l.kh = pick(1, std::min(3, cur.height));
            l.kw = pick(1, std::min(3, cur.width));
            l.stride = pick(1, 2);
            l.padding = pick(0, std::min(l.kh, l.kw) / 2);
            l.feature_groups = cur.features % 2 == 0 && pick(0, 2) == 0 ? 2 : 1;
        } while (l.fan_in() > 32);
        l.out_features = l.feature_groups * pick(1, 3);
        l.weights.resize(static_cast<size_t>(l.out_features) * l.fan_in());
        for (auto& w : l.weights) w = static_cast<int8_t>(pick(-1, 1));
        for (int o = 0; o < l.out_features; ++o) l.thresholds.push_back(pick(-2, 3));
        cur = l.output_shape(cur);
        spec.layers.push_back(std::move(l));
    }
    const size_t classes = std::min<size_t>(kNumClasses, cur.size());
    spec.class_populations.assign(classes, {});
    for (uint32_t id = 0; id < cur.size(); ++id) spec.class_populations[id % classes].push_back(id);
    return spec;
}

protocol::Message random_message(std::mt19937_64& rng) {
    auto u16 = [&] { return static_cast<uint16_t>(rng()); };
    switch (rng() % 5) {
        case 0: return protocol::Hello{u16(), u16(), u16(), u16()};
        case 1: {
            protocol::Spikes s{static_cast<uint32_t>(rng()), {}};
            s.events.resize(rng() % 64);
            for (auto& e : s.events) e = {u16(), u16(), u16()};
            return s;
        }
        case 2: {
            ClassHistogram h{static_cast<uint32_t>(rng()), {}};
            h.counts.resize(rng() % 8);
            for (auto& c : h.counts) c = static_cast<uint32_t>(rng());
            return h;
        }
        case 3: return protocol::Reset{};
        default: {
            std::string text;
            const int n = static_cast<int>(rng() % 12);
            for (int i = 0; i < n; ++i) {
                uint32_t cp;
                do cp = static_cast<uint32_t>(rng() % 0x110000);
                while (cp >= 0xD800 && cp <= 0xDFFF);
                append_utf8(text, cp);
            }
            return protocol::ErrorMessage{u16(), text};
        }
    }
}

EquivalenceResult check_equivalence(uint64_t nets, uint64_t frames, uint64_t seed) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    EquivalenceResult r;
    auto mismatch = [&](const std::string& what) {
        if (r.mismatches++ == 0) r.first_mismatch = what;
    };

    for (uint64_t n = 0; n < nets; ++n) {
        const TrinaryNetworkSpec spec = random_small_network(rng);
        const ReferenceNet ref(spec);
        const CoreletProgram prog = compile(spec);
        std::vector<std::vector<SpikeEvent>> inputs;
        std::vector<ClassHistogram> expect;
        for (int k = 0; k < 3; ++k) {
            const BinaryTensor x = random_input(spec.input_shape, rng);
            inputs.push_back(events_of(x));
            expect.push_back(ref.histogram(x));
        }
        for (bool pipelined : {false, true}) {
            SimOptions opt;
            opt.pipelined = pipelined;
            const auto got = run_frames(prog, inputs, opt);
            for (size_t k = 0; k < inputs.size(); ++k)
                if (got[k].counts != expect[k].counts)
                    mismatch("random net " + std::to_string(n) + (pipelined ? " pipelined" : " wave") + " frame " +
                             std::to_string(k));
        }
        r.net_frames += inputs.size();
        ++r.nets;
    }

    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, seed ^ 0x5eedULL, -3, 4);
    const ReferenceNet ref(spec);
    ChipState chip(compile(spec));
    for (uint64_t f = 0; f < frames; ++f) {
        RgbImage img(vision::kFrameWidth, vision::kFrameHeight);
        for (auto& p : img.pixels) p = static_cast<uint8_t>(rng());
        const auto events = vision::preprocess(img, spec);
        const auto plane = vision::from_xyf(events, spec.core_input_shape());
        const ClassHistogram want = ref.histogram(plane.to_tensor());
        chip.inject_spikes(events);
        const ClassHistogram got = chip.tick();
        if (got.counts != want.counts) mismatch("default network frame " + std::to_string(f));
        ++r.default_frames;
    }
    r.seconds = since(t0);
    return r;
}

FuzzResult fuzz_codec(uint64_t cases, uint64_t seed) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    FuzzResult r;
    auto fail = [&](const std::string& what) {
        if (r.failures++ == 0) r.first_failure = what;
    };
    std::vector<uint8_t> bytes;
    for (uint64_t i = 0; i < cases; ++i) {
        ++r.cases;
        try {
            if (i % 2 == 0) {
                const protocol::Message m = random_message(rng);
                bytes = protocol::encode(m);
                if (!(protocol::decode_message(bytes) == m)) fail("round trip of case " + std::to_string(i));
                bytes.push_back(static_cast<uint8_t>(rng()));
                const auto p = protocol::decode_prefix(bytes);
                if (p.status != protocol::DecodeStatus::Ok || p.consumed + 1 != bytes.size() || !(*p.message == m))
                    fail("stream prefix of case " + std::to_string(i));
                ++r.roundtrips;
            } else {
                // Mutate a valid encoding or start from noise.
                if (rng() % 4 != 0) {
                    bytes = protocol::encode(random_message(rng));
                    const int flips = 1 + static_cast<int>(rng() % 4);
                    for (int k = 0; k < flips; ++k) bytes[rng() % bytes.size()] ^= static_cast<uint8_t>(1 + rng() % 255);
                    if (rng() % 3 == 0) bytes.resize(rng() % (bytes.size() + 1));
                } else {
                    bytes.resize(rng() % 48);
                    for (auto& b : bytes) b = static_cast<uint8_t>(rng());
                }
                try {
                    const protocol::Message m = protocol::decode_message(bytes);
                    // Whatever decodes must re-encode to the same bytes.
                    if (protocol::encode(m) != bytes) fail("non-canonical decode in case " + std::to_string(i));
                } catch (const protocol::DecodeError&) {
                    ++r.rejected;
                }
                const auto p = protocol::decode_prefix(bytes);
                if (p.consumed > bytes.size()) fail("prefix overrun in case " + std::to_string(i));
            }
        } catch (const std::exception& e) {
            fail("case " + std::to_string(i) + " threw " + e.what());
        }
    }
    r.seconds = since(t0);
    return r;
}

GradientResult check_gradients(uint64_t seed, double step) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    RelaxedProblem p;
    p.spec.input_shape = {6, 5, 2};
    LayerSpec a;
    a.kh = a.kw = 3;
    a.stride = 2;
    a.padding = 1;
    a.in_features = 2;
    a.out_features = 4;
    a.feature_groups = 2;
    LayerSpec b;
    b.kind = LayerKind::CoreClassifier;
    b.kh = b.kw = 1;
    b.in_features = 4;
    b.out_features = 3;
    for (LayerSpec* l : {&a, &b}) {
        l->weights.assign(static_cast<size_t>(l->out_features) * l->fan_in(), 0);
        l->thresholds.assign(l->out_features, 0);
    }
    p.spec.layers = {a, b};
    const Shape3 out = p.spec.output_shape();
    p.spec.class_populations.assign(kNumClasses, {});
    for (int f = 0; f < out.features; ++f)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                p.spec.class_populations[f % kNumClasses].push_back(static_cast<uint32_t>(out.index(x, y, f)));
    for (const auto& l : p.spec.layers) {
        std::vector<double> w(l.weights.size()), bias(l.out_features);
        for (auto& v : w) v = u(rng);
        for (auto& v : bias) v = 0.3 * u(rng);
        p.weights.push_back(std::move(w));
        p.bias.push_back(std::move(bias));
    }
    p.widths = {3.0, 2.5};
    for (int i = 0; i < 4; ++i) {
        std::vector<double> x(p.spec.input_shape.size());
        for (auto& v : x) v = u(rng);
        p.inputs.push_back(std::move(x));
        p.labels.push_back(i % kNumClasses);
    }
    p.logit_scale = 0.7;

    const RelaxedGradients g = relaxed_loss_and_gradients(p);
    GradientResult r;
    auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + step;
        const double up = relaxed_loss_and_gradients(p).loss;
        param = keep - step;
        const double down = relaxed_loss_and_gradients(p).loss;
        param = keep;
        const double fd = (up - down) / (2 * step);
        const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-3});
        r.max_relative_error = std::max(r.max_relative_error, std::abs(fd - analytic) / scale);
        ++r.parameters;
    };
    for (size_t l = 0; l < p.weights.size(); ++l) {
        for (size_t k = 0; k < p.weights[l].size(); ++k) probe(p.weights[l][k], g.weights[l][k]);
        for (size_t k = 0; k < p.bias[l].size(); ++k) probe(p.bias[l][k], g.bias[l][k]);
    }
    return r;
}

}  // namespace neurotrail::verify
