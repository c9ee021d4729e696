// Compiled with AVX-512 F/BW/VL/VPOPCNTDQ enabled; only reached through
// dispatch when the CPU reports all four.
#include <immintrin.h>

#include <algorithm>

#include "neurotrail/simd.hpp"

namespace neurotrail::simd::detail {

namespace {

inline int32_t hsum_epi64(__m256i v) {
    __m128i s = _mm_add_epi64(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
    return static_cast<int32_t>(_mm_cvtsi128_si64(s) + _mm_extract_epi64(s, 1));
}

}  // namespace

void crossbar_sums_avx512(const uint64_t* input, const uint64_t* pos, const uint64_t* neg,
                          size_t neurons, int32_t* sums) {
    const __m256i in = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(input));
    const __m512i in2 = _mm512_inserti64x4(_mm512_castsi256_si512(in), in, 1);
    size_t n = 0;
    // Two rows per 512-bit register.
    for (; n + 2 <= neurons; n += 2) {
        __m512i p = _mm512_loadu_si512(pos + n * kLineWords);
        __m512i q = _mm512_loadu_si512(neg + n * kLineWords);
        __m512i d = _mm512_sub_epi64(_mm512_popcnt_epi64(_mm512_and_si512(in2, p)),
                                     _mm512_popcnt_epi64(_mm512_and_si512(in2, q)));
        sums[n] = hsum_epi64(_mm512_castsi512_si256(d));
        sums[n + 1] = hsum_epi64(_mm512_extracti64x4_epi64(d, 1));
    }
    for (; n < neurons; ++n) {
        __m256i p = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(pos + n * kLineWords));
        __m256i q = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(neg + n * kLineWords));
        sums[n] = hsum_epi64(_mm256_sub_epi64(_mm256_popcnt_epi64(_mm256_and_si256(in, p)),
                                              _mm256_popcnt_epi64(_mm256_and_si256(in, q))));
    }
}

void trinary_conv_avx512(const ConvGeometry& g, const int16_t* padded, const int8_t* weights,
                         int32_t* out) {
    const int pw = g.width + g.kw - 1;
    const int ph = g.height + g.kh - 1;
    const size_t plane = static_cast<size_t>(pw) * ph;
    const int taps = g.kh * g.kw * g.channels;
    for (int f = 0; f < g.features; ++f) {
        const int8_t* wf = weights + static_cast<size_t>(f) * taps;
        int32_t* of = out + static_cast<size_t>(f) * g.width * g.height;
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; x += 32) {
                const int lanes = std::min(32, g.width - x);
                const __mmask32 mask = lanes == 32 ? ~__mmask32{0} : ((__mmask32{1} << lanes) - 1);
                __m512i acc = _mm512_setzero_si512();
                for (int ky = 0; ky < g.kh; ++ky)
                    for (int kx = 0; kx < g.kw; ++kx)
                        for (int c = 0; c < g.channels; ++c) {
                            const int8_t w = wf[(ky * g.kw + kx) * g.channels + c];
                            if (w == 0) continue;
                            const int16_t* src = padded + c * plane + static_cast<size_t>(y + ky) * pw + x + kx;
                            __m512i v = _mm512_maskz_loadu_epi16(mask, src);
                            acc = w > 0 ? _mm512_add_epi16(acc, v) : _mm512_sub_epi16(acc, v);
                        }
                int32_t* dst = of + y * g.width + x;
                const __mmask16 lo = static_cast<__mmask16>(mask);
                const __mmask16 hi = static_cast<__mmask16>(mask >> 16);
                _mm512_mask_storeu_epi32(dst, lo, _mm512_cvtepi16_epi32(_mm512_castsi512_si256(acc)));
                _mm512_mask_storeu_epi32(dst + 16, hi,
                                         _mm512_cvtepi16_epi32(_mm512_extracti64x4_epi64(acc, 1)));
            }
        }
    }
}

}  // namespace neurotrail::simd::detail
