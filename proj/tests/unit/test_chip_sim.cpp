#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "neurotrail/chip_sim.hpp"
#include "neurotrail/corelet.hpp"
#include "neurotrail/error.hpp"

using namespace neurotrail;

namespace {

std::vector<std::vector<SpikeEvent>> random_frames(const Shape3& s, std::mt19937_64& rng, int n, double density) {
    std::vector<std::vector<SpikeEvent>> frames;
    for (int i = 0; i < n; ++i) frames.push_back(oracle::to_events(oracle::random_tensor(s, rng, density)));
    return frames;
}

BinaryTensor dense(const Shape3& s, const std::vector<SpikeEvent>& ev) {
    BinaryTensor t(s);
    for (const auto& e : ev) t.bits[s.index(e.x, e.y, e.f)] = 1;
    return t;
}

}  // namespace

TEST_CASE("random small nets match the dense oracle in every simulator mode") {
    std::mt19937_64 rng(11);
    CompileOptions tight;
    tight.core_lines = 32;
    tight.core_neurons = 8;
    for (int trial = 0; trial < 150; ++trial) {
        const auto spec = oracle::random_small_net(rng);
        const auto frames = random_frames(spec.input_shape, rng, 4, 0.4);
        std::vector<std::vector<uint32_t>> expect;
        for (const auto& f : frames) expect.push_back(oracle::dense_histogram(spec, dense(spec.input_shape, f)));

        for (const CompileOptions& opt : {CompileOptions{}, tight}) {
            const auto prog = compile(spec, opt);
            for (bool pipelined : {false, true})
                for (bool event_driven : {false, true}) {
                    SimOptions so;
                    so.pipelined = pipelined;
                    so.event_driven = event_driven;
                    const auto got = run_frames(prog, frames, so);
                    REQUIRE(got.size() == frames.size());
                    for (size_t i = 0; i < frames.size(); ++i) {
                        CHECK(got[i].tick == i);
                        CHECK(got[i].counts == expect[i]);
                    }
                }
        }
    }
}

TEST_CASE("every supported ISA gives the same histograms") {
    std::mt19937_64 rng(5);
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 3);
    const auto prog = compile(spec);
    const auto frames = random_frames(prog.input_shape, rng, 3, 0.3);
    SimOptions base;
    base.isa = simd::Isa::Scalar;
    const auto ref = run_frames(prog, frames, base);
    for (auto isa : simd::supported_isas()) {
        SimOptions so;
        so.isa = isa;
        CHECK(run_frames(prog, frames, so) == ref);
    }
}

TEST_CASE("load rejects an invalid program and reload is deterministic") {
    std::mt19937_64 rng(2);
    const auto prog = compile(oracle::random_small_net(rng));
    ChipState a(prog), b(prog);
    CHECK(a.current_tick() == 0);
    CHECK(a.snapshot() == b.snapshot());

    auto broken = prog;
    broken.cores[0].neurons[0].weights.push_back(1);
    CHECK_THROWS_AS(ChipState{broken}, LoadError);
}

TEST_CASE("inject validates coordinates and is idempotent") {
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 9);
    const auto prog = compile(spec);
    ChipState a(prog), b(prog);
    a.inject_spikes({});
    CHECK(a.snapshot() == b.snapshot());

    const std::vector<SpikeEvent> one{{3, 4, 5}};
    const std::vector<SpikeEvent> twice{{3, 4, 5}, {3, 4, 5}};
    a.inject_spikes(one);
    b.inject_spikes(twice);
    CHECK(a.snapshot() == b.snapshot());

    ChipState c(prog);
    const auto before = c.snapshot();
    const std::vector<SpikeEvent> bad{{1, 1, 1}, {44, 0, 0}};
    CHECK_THROWS_AS(c.inject_spikes(bad), RangeError);
    CHECK(c.snapshot() == before);
}

TEST_CASE("silent input with non-negative thresholds gives an empty histogram") {
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 4, 0, 3);
    ChipState chip(compile(spec));
    const auto h = chip.tick();
    CHECK(h.counts == std::vector<uint32_t>{0, 0, 0});
    CHECK(chip.current_tick() == 1);
    CHECK(chip.stats().cores_evaluated == 0);
}

TEST_CASE("histogram sum is bounded by the output population") {
    std::mt19937_64 rng(8);
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 8, -3, 0);
    ChipState chip(compile(spec));
    for (const auto& f : random_frames(chip.program().input_shape, rng, 5, 0.5)) {
        chip.inject_spikes(f);
        const auto h = chip.tick();
        uint32_t sum = 0;
        for (auto c : h.counts) sum += c;
        CHECK(sum <= 90);
    }
}

TEST_CASE("frames are independent: permuting frames permutes histograms") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto prog = compile(oracle::random_small_net(rng));
        auto frames = random_frames(prog.input_shape, rng, 6, 0.5);
        const auto h = run_frames(prog, frames);
        std::vector<size_t> perm(frames.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::vector<SpikeEvent>> shuffled;
        for (size_t i : perm) shuffled.push_back(frames[i]);
        const auto hs = run_frames(prog, shuffled);
        for (size_t i = 0; i < perm.size(); ++i) CHECK(hs[i].counts == h[perm[i]].counts);
    }
}

TEST_CASE("non-negative nets are monotone in their input") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        auto spec = oracle::random_small_net(rng);
        for (auto& l : spec.layers)
            for (auto& w : l.weights) w = static_cast<int8_t>(std::abs(w));
        const auto prog = compile(spec);
        const auto full = oracle::random_tensor(spec.input_shape, rng, 0.6);
        auto subset = full;
        std::bernoulli_distribution keep(0.5);
        for (auto& b : subset.bits) b = b && keep(rng);
        const auto h = run_frames(prog, {oracle::to_events(full), oracle::to_events(subset)});
        for (size_t c = 0; c < h[0].counts.size(); ++c) CHECK(h[1].counts[c] <= h[0].counts[c]);
    }
}

TEST_CASE("pipelined histograms equal wave histograms shifted by the latency") {
    std::mt19937_64 rng(17);
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 17);
    const auto prog = compile(spec);
    const auto frames = random_frames(prog.input_shape, rng, 5, 0.3);
    const auto wave = run_frames(prog, frames);

    SimOptions so;
    so.pipelined = true;
    ChipState chip(prog, so);
    CHECK(chip.latency() == 3);
    std::vector<ClassHistogram> raw;
    for (size_t i = 0; i < frames.size() + chip.latency(); ++i) {
        if (i < frames.size()) chip.inject_spikes(frames[i]);
        raw.push_back(chip.tick());
    }
    for (size_t i = 0; i < frames.size(); ++i) CHECK(raw[i + chip.latency()].counts == wave[i].counts);
}

TEST_CASE("event-driven skipping is counted and unobservable") {
    std::mt19937_64 rng(41);
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 41);
    const auto prog = compile(spec);
    std::vector<std::vector<SpikeEvent>> frames{{}, {{0, 0, 0}}, {{43, 35, 11}, {20, 10, 3}}};
    SimOptions dense_opt;
    dense_opt.event_driven = false;
    ChipState sparse(prog), full(prog, dense_opt);
    CHECK(sparse.run_frames(frames) == full.run_frames(frames));
    CHECK(sparse.stats().cores_skipped > 0);
    CHECK(full.stats().cores_skipped == 0);
    CHECK(sparse.stats().ticks == 3);
    CHECK(sparse.stats().input_spikes == 3);
}

TEST_CASE("run_frames on zero frames is empty and stats serialize") {
    std::mt19937_64 rng(1);
    ChipState chip(compile(oracle::random_small_net(rng)));
    CHECK(chip.run_frames({}).empty());
    CHECK(chip.stats().to_json().find("\"ticks\":0") != std::string::npos);
}
