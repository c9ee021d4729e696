#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurotrail/corelet.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/simd.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail {

struct SimOptions {
    // Evaluate one layer per tick with double-buffered lines instead of a
    // whole feedforward wave; histograms then lag their frame by latency().
    bool pipelined = false;
    // Skip the crossbar of cores with no active line.
    bool event_driven = true;
    simd::Isa isa = simd::active_isa();
};

struct SimStats {
    uint64_t ticks = 0;
    uint64_t input_spikes = 0;   // accepted events, duplicates included
    uint64_t neuron_spikes = 0;
    uint64_t spikes_routed = 0;  // line deliveries between cores
    uint64_t cores_evaluated = 0;
    uint64_t cores_skipped = 0;

    std::string to_json() const;
};

class ChipState {
public:
    // Throws LoadError listing every violation when the program is invalid.
    explicit ChipState(CoreletProgram program, SimOptions options = {});

    // Sets the input lines fed by each event. The whole batch is checked
    // first; an out-of-range coordinate throws RangeError and sets nothing.
    void inject_spikes(std::span<const SpikeEvent> spikes);

    // Advances one tick and clears the consumed input lines. In wave mode the
    // histogram belongs to the frame injected before this call; pipelined, to
    // the frame injected latency() ticks earlier.
    ClassHistogram tick();

    // inject + tick per frame. Pipelined mode flushes the pipeline so the
    // result lines up with wave mode frame by frame.
    std::vector<ClassHistogram> run_frames(const std::vector<std::vector<SpikeEvent>>& frames);

    uint32_t current_tick() const { return tick_; }
    uint32_t latency() const { return options_.pipelined && depth_ > 0 ? depth_ - 1 : 0; }
    const CoreletProgram& program() const { return program_; }
    const SimStats& stats() const { return stats_; }
    // Tick counter and all line bitmaps, for determinism checks.
    std::vector<uint8_t> snapshot() const;

private:
    using Lines = std::array<uint64_t, simd::kLineWords>;

    struct Core {
        uint16_t layer = 0;
        std::vector<uint64_t> pos, neg;  // kLineWords per neuron
        std::vector<int32_t> thresholds;
        std::vector<uint32_t> neuron_ids;
        std::vector<uint32_t> quiescent;  // local indices firing on zero input
    };

    void evaluate(size_t core, const Lines& lines, std::vector<Lines>& dest, std::vector<uint32_t>& counts);

    CoreletProgram program_;
    SimOptions options_;
    std::vector<Core> cores_;
    std::vector<size_t> order_;  // cores sorted by layer
    std::vector<Lines> pending_;
    std::vector<Lines> staged_;  // pipelined: lines for the next tick
    std::vector<int16_t> class_of_;
    std::vector<int32_t> sums_;
    uint32_t depth_ = 0;
    uint32_t tick_ = 0;
    SimStats stats_;
};

std::vector<ClassHistogram> run_frames(const CoreletProgram& program,
                                       const std::vector<std::vector<SpikeEvent>>& frames,
                                       const SimOptions& options = {});

// In-process HistogramSource backed by a ChipState in wave mode.
class LocalChip : public pilot::HistogramSource {
public:
    explicit LocalChip(CoreletProgram program, simd::Isa isa = simd::active_isa());
    ClassHistogram classify(const std::vector<SpikeEvent>& spikes, uint32_t tick) override;
    const ChipState& state() const { return state_; }

private:
    ChipState state_;
};

}  // namespace neurotrail
