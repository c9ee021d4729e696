// Compiled with -mavx2 -mpopcnt; only reached through dispatch when the CPU
// reports AVX2.
#include <immintrin.h>

#include "neurotrail/simd.hpp"

namespace neurotrail::simd::detail {

namespace {

inline __m256i popcount_bytes(__m256i v) {
    const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                         0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i nibble = _mm256_set1_epi8(0x0f);
    __m256i lo = _mm256_and_si256(v, nibble);
    __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), nibble);
    return _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
}

inline int64_t hsum_epi64(__m256i v) {
    __m128i s = _mm_add_epi64(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
    return _mm_cvtsi128_si64(s) + _mm_extract_epi64(s, 1);
}

}  // namespace

void crossbar_sums_avx2(const uint64_t* input, const uint64_t* pos, const uint64_t* neg,
                        size_t neurons, int32_t* sums) {
    const __m256i in = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(input));
    const __m256i zero = _mm256_setzero_si256();
    for (size_t n = 0; n < neurons; ++n) {
        __m256i p = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(pos + n * kLineWords));
        __m256i q = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(neg + n * kLineWords));
        __m256i cp = _mm256_sad_epu8(popcount_bytes(_mm256_and_si256(in, p)), zero);
        __m256i cn = _mm256_sad_epu8(popcount_bytes(_mm256_and_si256(in, q)), zero);
        sums[n] = static_cast<int32_t>(hsum_epi64(_mm256_sub_epi64(cp, cn)));
    }
}

void trinary_conv_avx2(const ConvGeometry& g, const int16_t* padded, const int8_t* weights,
                       int32_t* out) {
    const int pw = g.width + g.kw - 1;
    const int ph = g.height + g.kh - 1;
    const size_t plane = static_cast<size_t>(pw) * ph;
    const int taps = g.kh * g.kw * g.channels;
    for (int f = 0; f < g.features; ++f) {
        const int8_t* wf = weights + static_cast<size_t>(f) * taps;
        int32_t* of = out + static_cast<size_t>(f) * g.width * g.height;
        for (int y = 0; y < g.height; ++y) {
            int x = 0;
            for (; x + 16 <= g.width; x += 16) {
                __m256i acc = _mm256_setzero_si256();
                for (int ky = 0; ky < g.kh; ++ky)
                    for (int kx = 0; kx < g.kw; ++kx)
                        for (int c = 0; c < g.channels; ++c) {
                            const int8_t w = wf[(ky * g.kw + kx) * g.channels + c];
                            if (w == 0) continue;
                            const int16_t* src = padded + c * plane + static_cast<size_t>(y + ky) * pw + x + kx;
                            __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src));
                            acc = w > 0 ? _mm256_add_epi16(acc, v) : _mm256_sub_epi16(acc, v);
                        }
                int32_t* dst = of + y * g.width + x;
                _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst),
                                    _mm256_cvtepi16_epi32(_mm256_castsi256_si128(acc)));
                _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + 8),
                                    _mm256_cvtepi16_epi32(_mm256_extracti128_si256(acc, 1)));
            }
            for (; x < g.width; ++x) {
                int32_t acc = 0;
                for (int ky = 0; ky < g.kh; ++ky)
                    for (int kx = 0; kx < g.kw; ++kx)
                        for (int c = 0; c < g.channels; ++c)
                            acc += wf[(ky * g.kw + kx) * g.channels + c] *
                                   padded[c * plane + static_cast<size_t>(y + ky) * pw + x + kx];
                of[y * g.width + x] = acc;
            }
        }
    }
}

}  // namespace neurotrail::simd::detail
