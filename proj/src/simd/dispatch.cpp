#include <cstdlib>
#include <string_view>

#include "neurotrail/simd.hpp"

namespace neurotrail::simd {

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Avx512: return "avx512";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
#if defined(NEUROTRAIL_X86_KERNELS)
        case Isa::Avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
        case Isa::Avx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") &&
                   __builtin_cpu_supports("avx512vl") && __builtin_cpu_supports("avx512vpopcntdq");
#else
        default: return false;
#endif
    }
    return false;
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512})
        if (isa_supported(isa)) out.push_back(isa);
    return out;
}

namespace {

Isa detect() {
    Isa cap = Isa::Avx512;
    if (const char* env = std::getenv("NEUROTRAIL_SIMD")) {
        std::string_view v(env);
        if (v == "scalar") cap = Isa::Scalar;
        else if (v == "avx2") cap = Isa::Avx2;
    }
    for (Isa isa : {Isa::Avx512, Isa::Avx2})
        if (static_cast<int>(isa) <= static_cast<int>(cap) && isa_supported(isa)) return isa;
    return Isa::Scalar;
}

}  // namespace

Isa active_isa() {
    static const Isa isa = detect();
    return isa;
}

void crossbar_sums(Isa isa, const uint64_t* input, const uint64_t* pos, const uint64_t* neg,
                   size_t neurons, int32_t* sums) {
    switch (isa) {
#if defined(NEUROTRAIL_X86_KERNELS)
        case Isa::Avx512: return detail::crossbar_sums_avx512(input, pos, neg, neurons, sums);
        case Isa::Avx2: return detail::crossbar_sums_avx2(input, pos, neg, neurons, sums);
#endif
        default: return detail::crossbar_sums_scalar(input, pos, neg, neurons, sums);
    }
}

void trinary_conv_i16(Isa isa, const ConvGeometry& g, const int16_t* padded, const int8_t* weights,
                      int32_t* out) {
    switch (isa) {
#if defined(NEUROTRAIL_X86_KERNELS)
        case Isa::Avx512: return detail::trinary_conv_avx512(g, padded, weights, out);
        case Isa::Avx2: return detail::trinary_conv_avx2(g, padded, weights, out);
#endif
        default: return detail::trinary_conv_scalar(g, padded, weights, out);
    }
}

}  // namespace neurotrail::simd
