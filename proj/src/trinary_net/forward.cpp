#include <array>

#include "neurotrail/error.hpp"
#include "neurotrail/trinary_net.hpp"

namespace neurotrail {

ReferenceNet::ReferenceNet(const TrinaryNetworkSpec& spec, simd::Isa isa) : spec_(spec), isa_(isa) {
    spec_.validate();
    masks_.resize(spec_.layers.size());
    for (size_t li = spec_.first_core_layer(); li < spec_.layers.size(); ++li) {
        const LayerSpec& l = spec_.layers[li];
        LayerMasks& m = masks_[li];
        m.pos.assign(static_cast<size_t>(l.out_features) * simd::kLineWords, 0);
        m.neg.assign(m.pos.size(), 0);
        for (int o = 0; o < l.out_features; ++o) {
            for (int line = 0; line < l.fan_in(); ++line) {
                const int8_t w = l.weights[static_cast<size_t>(o) * l.fan_in() + line];
                const uint64_t bit = uint64_t{1} << (line % 64);
                const size_t word = static_cast<size_t>(o) * simd::kLineWords + line / 64;
                if (w > 0) m.pos[word] |= bit;
                if (w < 0) m.neg[word] |= bit;
            }
        }
    }
}

ForwardResult ReferenceNet::forward(const BinaryTensor& input) const {
    const Shape3 expect = spec_.core_input_shape();
    if (input.shape != expect || input.bits.size() != expect.size())
        throw ShapeError("input shape " + to_string(input.shape) + " does not match " + to_string(expect));
    for (uint8_t b : input.bits)
        if (b > 1) throw ValidationError("input activations must be 0 or 1");

    ForwardResult result;
    result.layer_spikes.reserve(spec_.layers.size());
    const BinaryTensor* cur = &input;
    std::vector<int32_t> sums;
    for (size_t li = spec_.first_core_layer(); li < spec_.layers.size(); ++li) {
        const LayerSpec& l = spec_.layers[li];
        const LayerMasks& m = masks_[li];
        BinaryTensor out(l.output_shape(cur->shape));
        const int cg = l.in_per_group();
        const int og = l.out_per_group();
        sums.resize(og);
        for (int oy = 0; oy < out.shape.height; ++oy) {
            for (int ox = 0; ox < out.shape.width; ++ox) {
                for (int g = 0; g < l.feature_groups; ++g) {
                    std::array<uint64_t, simd::kLineWords> lines{};
                    int line = 0;
                    for (int ky = 0; ky < l.kh; ++ky) {
                        const int iy = oy * l.stride - l.padding + ky;
                        for (int kx = 0; kx < l.kw; ++kx, line += cg) {
                            const int ix = ox * l.stride - l.padding + kx;
                            if (iy < 0 || ix < 0 || iy >= cur->shape.height || ix >= cur->shape.width)
                                continue;
                            for (int c = 0; c < cg; ++c)
                                if (cur->at(ix, iy, g * cg + c))
                                    lines[(line + c) / 64] |= uint64_t{1} << ((line + c) % 64);
                        }
                    }
                    const size_t row = static_cast<size_t>(g) * og * simd::kLineWords;
                    simd::crossbar_sums(isa_, lines.data(), m.pos.data() + row, m.neg.data() + row, og,
                                        sums.data());
                    for (int k = 0; k < og; ++k) {
                        const int o = g * og + k;
                        out.bits[out.shape.index(ox, oy, o)] = sums[k] > l.thresholds[o] ? 1 : 0;
                    }
                }
            }
        }
        result.layer_spikes.push_back(std::move(out));
        cur = &result.layer_spikes.back();
    }
    result.histogram = count_populations(spec_, result.layer_spikes.back());
    return result;
}

ForwardResult forward(const TrinaryNetworkSpec& spec, const BinaryTensor& input) {
    return ReferenceNet(spec).forward(input);
}

}  // namespace neurotrail
