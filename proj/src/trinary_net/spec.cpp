#include <algorithm>
#include <cmath>
#include <random>

#include "neurotrail/error.hpp"
#include "neurotrail/trinary_net.hpp"

namespace neurotrail {

std::string_view layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::HostConv: return "host_conv";
        case LayerKind::CoreConv: return "core_conv";
        case LayerKind::CoreClassifier: return "core_classifier";
    }
    return "?";
}

Shape3 LayerSpec::output_shape(const Shape3& in) const {
    auto dim = [&](int n, int k) {
        int span = n + 2 * padding - k;
        return span < 0 ? 0 : span / stride + 1;
    };
    return {dim(in.width, kw), dim(in.height, kh), out_features};
}

Shape3 TrinaryNetworkSpec::layer_input_shape(size_t layer) const {
    Shape3 s = input_shape;
    for (size_t i = 0; i < layer; ++i) s = layers[i].output_shape(s);
    return s;
}

Shape3 TrinaryNetworkSpec::layer_output_shape(size_t layer) const {
    return layers[layer].output_shape(layer_input_shape(layer));
}

size_t TrinaryNetworkSpec::first_core_layer() const { return has_host_layer() ? 1 : 0; }

namespace {

[[noreturn]] void fail(size_t layer, const std::string& what) {
    throw ValidationError("layer " + std::to_string(layer) + ": " + what);
}

}  // namespace

void TrinaryNetworkSpec::validate() const {
    if (input_shape.width <= 0 || input_shape.height <= 0 || input_shape.features <= 0)
        throw ValidationError("input shape " + to_string(input_shape) + " is empty");
    if (layers.empty()) throw ValidationError("network has no layers");

    Shape3 in = input_shape;
    size_t on_chip = 0;
    for (size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.kh < 1 || l.kw < 1 || l.stride < 1 || l.padding < 0)
            fail(i, "bad kernel/stride/padding");
        if (l.in_features < 1 || l.out_features < 1 || l.feature_groups < 1)
            fail(i, "feature counts must be positive");
        if (l.in_features % l.feature_groups != 0 || l.out_features % l.feature_groups != 0)
            fail(i, "features not divisible by feature_groups");
        if (l.in_features != in.features)
            fail(i, "expects " + std::to_string(l.in_features) + " input features, got " +
                        std::to_string(in.features));
        if (l.thresholds.size() != static_cast<size_t>(l.out_features))
            fail(i, "threshold count mismatch");
        if (l.weights.size() != static_cast<size_t>(l.out_features) * l.fan_in())
            fail(i, "weight count mismatch");
        for (int8_t w : l.weights)
            if (w < -1 || w > 1) fail(i, "weight value " + std::to_string(w) + " is not trinary");
        if (l.kind == LayerKind::HostConv) {
            if (i != 0) fail(i, "host_conv is only allowed as the first layer");
            if (l.stride != 1 || l.kh != l.kw || l.kh % 2 == 0 || l.padding != l.kh / 2)
                fail(i, "host_conv must be an odd square kernel, stride 1, same padding");
            if (l.feature_groups != 1) fail(i, "host_conv must not be grouped");
            if (l.fan_in() > 255) fail(i, "host_conv fan-in exceeds 255");
        } else {
            ++on_chip;
            if (l.fan_in() > kMaxFanIn)
                fail(i, "fan-in " + std::to_string(l.fan_in()) + " exceeds " + std::to_string(kMaxFanIn));
        }
        Shape3 out = l.output_shape(in);
        if (out.width < 1 || out.height < 1) fail(i, "output is empty for input " + to_string(in));
        in = out;
    }
    if (on_chip == 0) throw ValidationError("network has no on-chip layer");

    if (class_populations.empty()) throw ValidationError("no class populations");
    std::vector<uint8_t> seen(in.size(), 0);
    for (size_t c = 0; c < class_populations.size(); ++c) {
        if (class_populations[c].empty())
            throw ValidationError("class population " + std::to_string(c) + " is empty");
        for (uint32_t id : class_populations[c]) {
            if (id >= in.size())
                throw ValidationError("population neuron " + std::to_string(id) + " out of range");
            if (seen[id]++)
                throw ValidationError("neuron " + std::to_string(id) + " is in more than one population");
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw ValidationError("class populations do not cover the final layer");
}

std::vector<std::string> TrinaryNetworkSpec::lint() const {
    std::vector<std::string> out;
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& w = layers[i].weights;
        if (std::all_of(w.begin(), w.end(), [](int8_t v) { return v == 0; }))
            out.push_back("layer " + std::to_string(i) + " has all-zero weights");
    }
    return out;
}

ClassHistogram count_populations(const TrinaryNetworkSpec& spec, const BinaryTensor& output) {
    ClassHistogram h;
    h.counts.assign(spec.class_populations.size(), 0);
    for (size_t c = 0; c < spec.class_populations.size(); ++c)
        for (uint32_t id : spec.class_populations[c]) h.counts[c] += output.bits[id];
    return h;
}

TrinaryNetworkSpec make_default_architecture(const ArchitectureOptions& opt) {
    TrinaryNetworkSpec spec;
    spec.input_shape = {44, 36, 3};

    auto add = [&](LayerKind kind, int kh, int kw, int stride, int pad, int in, int out, int groups) {
        LayerSpec l;
        l.kind = kind;
        l.kh = kh;
        l.kw = kw;
        l.stride = stride;
        l.padding = pad;
        l.in_features = in;
        l.out_features = out;
        l.feature_groups = groups;
        l.thresholds.assign(out, 0);
        l.weights.assign(static_cast<size_t>(out) * l.fan_in(), 0);
        spec.layers.push_back(std::move(l));
    };

    add(LayerKind::HostConv, 3, 3, 1, 1, 3, opt.host_features, 1);
    int in = opt.host_features;
    for (size_t i = 0; i < opt.core_features.size(); ++i) {
        int groups = i < opt.core_groups.size() ? opt.core_groups[i] : 1;
        add(LayerKind::CoreConv, 3, 3, 2, 1, in, opt.core_features[i], groups);
        in = opt.core_features[i];
    }
    // The classifier spans each full row of the last feature map so its
    // votes can depend on horizontal position.
    const Shape3 last = spec.output_shape();
    const int per_row = kNumClasses * opt.neurons_per_class / last.height;
    if (per_row * last.height != kNumClasses * opt.neurons_per_class || per_row % opt.classifier_groups != 0 ||
        (per_row / opt.classifier_groups) % kNumClasses != 0)
        throw ValidationError("classifier cannot give " + std::to_string(opt.neurons_per_class) +
                              " neurons per class over " + std::to_string(last.height) + " rows");
    add(LayerKind::CoreClassifier, 1, last.width, 1, 0, in, per_row, opt.classifier_groups);

    const Shape3 out = spec.output_shape();
    spec.class_populations.resize(kNumClasses);
    for (int f = 0; f < out.features; ++f)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                spec.class_populations[f % kNumClasses].push_back(static_cast<uint32_t>(out.index(x, y, f)));
    return spec;
}

void randomize(TrinaryNetworkSpec& spec, uint64_t seed, int theta_lo, int theta_hi) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> w(-1, 1);
    std::uniform_int_distribution<int> t(theta_lo, theta_hi);
    for (auto& l : spec.layers) {
        for (auto& v : l.weights) v = static_cast<int8_t>(w(rng));
        for (auto& v : l.thresholds) v = t(rng);
    }
}

std::vector<int8_t> trinarize(std::span<const float> shadow, float tau_frac) {
    if (!(tau_frac > 0.f && tau_frac < 1.f))
        throw ValidationError("tau_frac must lie in (0, 1)");
    double mean_abs = 0;
    for (float v : shadow) mean_abs += std::abs(v);
    if (!shadow.empty()) mean_abs /= static_cast<double>(shadow.size());
    const float tau = static_cast<float>(tau_frac * mean_abs);
    std::vector<int8_t> out(shadow.size());
    for (size_t i = 0; i < shadow.size(); ++i)
        out[i] = shadow[i] > tau ? 1 : (shadow[i] < -tau ? -1 : 0);
    return out;
}

std::vector<std::vector<int8_t>> trinarize(const ShadowWeights& shadow) {
    std::vector<std::vector<int8_t>> out;
    out.reserve(shadow.layers.size());
    for (const auto& l : shadow.layers) out.push_back(trinarize(l, shadow.tau_frac));
    return out;
}

}  // namespace neurotrail
