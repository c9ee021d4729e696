#include <bit>

#include "neurotrail/simd.hpp"

namespace neurotrail::simd::detail {

void crossbar_sums_scalar(const uint64_t* input, const uint64_t* pos, const uint64_t* neg,
                          size_t neurons, int32_t* sums) {
    for (size_t n = 0; n < neurons; ++n) {
        int32_t s = 0;
        for (size_t w = 0; w < kLineWords; ++w) {
            s += std::popcount(input[w] & pos[n * kLineWords + w]);
            s -= std::popcount(input[w] & neg[n * kLineWords + w]);
        }
        sums[n] = s;
    }
}

void trinary_conv_scalar(const ConvGeometry& g, const int16_t* padded, const int8_t* weights,
                         int32_t* out) {
    const int pw = g.width + g.kw - 1;
    const int ph = g.height + g.kh - 1;
    const size_t plane = static_cast<size_t>(pw) * ph;
    for (int f = 0; f < g.features; ++f) {
        const int8_t* wf = weights + static_cast<size_t>(f) * g.kh * g.kw * g.channels;
        int32_t* of = out + static_cast<size_t>(f) * g.width * g.height;
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                int32_t acc = 0;
                for (int ky = 0; ky < g.kh; ++ky)
                    for (int kx = 0; kx < g.kw; ++kx)
                        for (int c = 0; c < g.channels; ++c) {
                            int8_t w = wf[(ky * g.kw + kx) * g.channels + c];
                            acc += w * padded[c * plane + static_cast<size_t>(y + ky) * pw + x + kx];
                        }
                of[y * g.width + x] = acc;
            }
        }
    }
}

}  // namespace neurotrail::simd::detail
