#include <bit>
#include <random>

#include "doctest.h"

#include "neurotrail/simd.hpp"

using namespace neurotrail;

TEST_CASE("scalar crossbar matches a per-line loop") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = rng() % 40 + 1;
        std::vector<uint64_t> input(simd::kLineWords), pos(n * simd::kLineWords), neg(n * simd::kLineWords);
        for (auto& w : input) w = rng() & rng();
        for (size_t i = 0; i < pos.size(); ++i) {
            pos[i] = rng() & rng();
            neg[i] = rng() & ~pos[i];
        }
        std::vector<int32_t> sums(n);
        simd::crossbar_sums(simd::Isa::Scalar, input.data(), pos.data(), neg.data(), n, sums.data());
        for (size_t r = 0; r < n; ++r) {
            int32_t expect = 0;
            for (size_t line = 0; line < simd::kMaxLines; ++line) {
                const uint64_t bit = uint64_t{1} << (line % 64);
                if (!(input[line / 64] & bit)) continue;
                if (pos[r * simd::kLineWords + line / 64] & bit) ++expect;
                if (neg[r * simd::kLineWords + line / 64] & bit) --expect;
            }
            CHECK(sums[r] == expect);
        }
    }
}

TEST_CASE("all crossbar kernels are bit-identical") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        const size_t n = rng() % 300;
        std::vector<uint64_t> input(simd::kLineWords), pos(n * simd::kLineWords), neg(n * simd::kLineWords);
        for (auto& w : input) w = trial % 7 == 0 ? ~uint64_t{0} : rng();
        for (auto& w : pos) w = rng();
        for (auto& w : neg) w = rng();
        std::vector<int32_t> ref(n + 1, 7);
        simd::crossbar_sums(simd::Isa::Scalar, input.data(), pos.data(), neg.data(), n, ref.data());
        for (auto isa : simd::supported_isas()) {
            std::vector<int32_t> got(n + 1, 7);
            simd::crossbar_sums(isa, input.data(), pos.data(), neg.data(), n, got.data());
            CHECK_MESSAGE(got == ref, simd::isa_name(isa));
        }
    }
}

TEST_CASE("scalar conv matches a direct loop") {
    std::mt19937_64 rng(3);
    simd::ConvGeometry g{7, 5, 3, 4, 3, 3};
    const int pw = g.width + g.kw - 1, ph = g.height + g.kh - 1;
    std::vector<int16_t> padded(static_cast<size_t>(g.channels) * pw * ph);
    std::vector<int8_t> w(static_cast<size_t>(g.features) * g.kh * g.kw * g.channels);
    for (auto& v : padded) v = static_cast<int16_t>(static_cast<int>(rng() % 256) - 128);
    for (auto& v : w) v = static_cast<int8_t>(static_cast<int>(rng() % 3) - 1);
    std::vector<int32_t> out(static_cast<size_t>(g.features) * g.width * g.height);
    simd::trinary_conv_i16(simd::Isa::Scalar, g, padded.data(), w.data(), out.data());
    for (int f = 0; f < g.features; ++f)
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                int32_t s = 0;
                for (int ky = 0; ky < g.kh; ++ky)
                    for (int kx = 0; kx < g.kw; ++kx)
                        for (int c = 0; c < g.channels; ++c)
                            s += w[((f * g.kh + ky) * g.kw + kx) * g.channels + c] *
                                 padded[(static_cast<size_t>(c) * ph + y + ky) * pw + x + kx];
                CHECK(out[(static_cast<size_t>(f) * g.height + y) * g.width + x] == s);
            }
}

TEST_CASE("all conv kernels are bit-identical, including ragged widths") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 60; ++trial) {
        simd::ConvGeometry g;
        g.width = static_cast<int>(rng() % 70) + 1;
        g.height = static_cast<int>(rng() % 9) + 1;
        g.channels = static_cast<int>(rng() % 4) + 1;
        g.features = static_cast<int>(rng() % 5) + 1;
        g.kh = g.kw = trial % 2 ? 3 : 1;
        const size_t pw = g.width + g.kw - 1, ph = g.height + g.kh - 1;
        std::vector<int16_t> padded(g.channels * pw * ph);
        std::vector<int8_t> w(static_cast<size_t>(g.features) * g.kh * g.kw * g.channels);
        for (auto& v : padded) v = static_cast<int16_t>(trial % 5 == 0 ? 127 : static_cast<int>(rng() % 256) - 128);
        for (auto& v : w) v = static_cast<int8_t>(trial % 5 == 0 ? 1 : static_cast<int>(rng() % 3) - 1);
        const size_t n = static_cast<size_t>(g.features) * g.width * g.height;
        std::vector<int32_t> ref(n);
        simd::trinary_conv_i16(simd::Isa::Scalar, g, padded.data(), w.data(), ref.data());
        for (auto isa : simd::supported_isas()) {
            std::vector<int32_t> got(n);
            simd::trinary_conv_i16(isa, g, padded.data(), w.data(), got.data());
            CHECK_MESSAGE(got == ref, simd::isa_name(isa));
        }
    }
}

TEST_CASE("ISA selection") {
    CHECK(simd::isa_supported(simd::Isa::Scalar));
    CHECK(simd::supported_isas().front() == simd::Isa::Scalar);
    CHECK(simd::isa_supported(simd::active_isa()));
}
