#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "neurotrail/protocol.hpp"
#include "neurotrail/trinary_net.hpp"

// Self-checks behind the `neurotrail verify` subcommand and the acceptance
// run.
namespace neurotrail::verify {

// 1 to 3 on-chip layers over an input of at most 9 x 9 x 4, fan-in <= 32,
// random kernels, strides, padding, groups, weights and thresholds.
TrinaryNetworkSpec random_small_network(std::mt19937_64& rng);

// Any message of the protocol grammar with random fields.
protocol::Message random_message(std::mt19937_64& rng);

struct EquivalenceResult {
    uint64_t nets = 0;
    uint64_t net_frames = 0;
    uint64_t default_frames = 0;
    uint64_t mismatches = 0;
    double seconds = 0;
    std::string first_mismatch;
    bool passed() const { return mismatches == 0; }
};

// Compiles `nets` random small networks and a randomized default network
// and compares chip_sim histograms against trinary_net.forward: a few random
// inputs per small net (wave and pipelined), `frames` random camera frames
// through the full host path on the default network.
EquivalenceResult check_equivalence(uint64_t nets, uint64_t frames, uint64_t seed);

struct FuzzResult {
    uint64_t cases = 0;
    uint64_t roundtrips = 0;
    uint64_t rejected = 0;  // mutated inputs refused with a DecodeError
    uint64_t failures = 0;  // round-trip mismatches or unexpected exceptions
    double seconds = 0;
    std::string first_failure;
    bool passed() const { return failures == 0; }
};

// Half the cases encode a random message and require decode(encode(m)) == m
// (whole and as a stream prefix); the other half decode mutated or random
// bytes and require either a message or a DecodeError.
FuzzResult fuzz_codec(uint64_t cases, uint64_t seed);

struct GradientResult {
    size_t parameters = 0;
    double max_relative_error = 0;
};

// Relaxed-network gradients of a random 2-layer toy net against central
// finite differences; relative error uses max(|fd|, |analytic|, 1e-3).
GradientResult check_gradients(uint64_t seed, double step = 1e-6);

}  // namespace neurotrail::verify
