#pragma once

// Data-parallel inner loops shared by the reference forward pass, the chip
// simulator and the host-side preprocessing. Each kernel has a portable
// scalar implementation and x86 variants picked at runtime; all variants are
// required to be bit-identical (see tests/unit/test_simd.cpp).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace neurotrail::simd {

enum class Isa : uint8_t { Scalar = 0, Avx2 = 1, Avx512 = 2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
std::vector<Isa> supported_isas();

// Highest supported ISA, capped by the NEUROTRAIL_SIMD environment variable
// ("scalar", "avx2", "avx512") when set.
Isa active_isa();

// A crossbar row spans 256 input lines.
inline constexpr size_t kLineWords = 4;
inline constexpr size_t kMaxLines = kLineWords * 64;

// sums[n] = popcount(input & pos[n]) - popcount(input & neg[n]) for each of
// `neurons` rows. `pos`/`neg` hold kLineWords words per row.
void crossbar_sums(Isa isa, const uint64_t* input, const uint64_t* pos, const uint64_t* neg,
                   size_t neurons, int32_t* sums);

inline void crossbar_sums(const uint64_t* input, const uint64_t* pos, const uint64_t* neg,
                          size_t neurons, int32_t* sums) {
    crossbar_sums(active_isa(), input, pos, neg, neurons, sums);
}

// Stride-1 convolution with trinary weights over a pre-padded int16 image.
//   padded:  channels planes of (height + kh - 1) x (width + kw - 1), row-major
//   weights: [features][kh][kw][channels], values in {-1, 0, 1}
//   out:     [features][height][width]
// Every padded value must lie in [-128, 127] and kh*kw*channels <= 255 so the
// accumulation cannot leave int16 range.
struct ConvGeometry {
    int width = 0;
    int height = 0;
    int channels = 0;
    int features = 0;
    int kh = 0;
    int kw = 0;
};

void trinary_conv_i16(Isa isa, const ConvGeometry& g, const int16_t* padded, const int8_t* weights,
                      int32_t* out);

inline void trinary_conv_i16(const ConvGeometry& g, const int16_t* padded, const int8_t* weights,
                             int32_t* out) {
    trinary_conv_i16(active_isa(), g, padded, weights, out);
}

namespace detail {
void crossbar_sums_scalar(const uint64_t*, const uint64_t*, const uint64_t*, size_t, int32_t*);
void crossbar_sums_avx2(const uint64_t*, const uint64_t*, const uint64_t*, size_t, int32_t*);
void crossbar_sums_avx512(const uint64_t*, const uint64_t*, const uint64_t*, size_t, int32_t*);
void trinary_conv_scalar(const ConvGeometry&, const int16_t*, const int8_t*, int32_t*);
void trinary_conv_avx2(const ConvGeometry&, const int16_t*, const int8_t*, int32_t*);
void trinary_conv_avx512(const ConvGeometry&, const int16_t*, const int8_t*, int32_t*);
}  // namespace detail

}  // namespace neurotrail::simd
