#include <algorithm>
#include <bit>
#include <numeric>

#include "json.hpp"

#include "neurotrail/bytes.hpp"
#include "neurotrail/chip_sim.hpp"
#include "neurotrail/error.hpp"

namespace neurotrail {

std::string SimStats::to_json() const {
    nlohmann::json j{{"ticks", ticks},
                     {"input_spikes", input_spikes},
                     {"neuron_spikes", neuron_spikes},
                     {"spikes_routed", spikes_routed},
                     {"cores_evaluated", cores_evaluated},
                     {"cores_skipped", cores_skipped}};
    return j.dump();
}

ChipState::ChipState(CoreletProgram program, SimOptions options)
    : program_(std::move(program)), options_(options) {
    const auto violations = validate(program_);
    if (!violations.empty()) {
        std::string msg = std::to_string(violations.size()) + " program violation(s): " + violations.front();
        for (size_t i = 1; i < violations.size() && i < 5; ++i) msg += "; " + violations[i];
        if (violations.size() > 5) msg += "; ...";
        throw LoadError(msg);
    }
    if (!simd::isa_supported(options_.isa)) options_.isa = simd::Isa::Scalar;

    cores_.resize(program_.cores.size());
    size_t max_neurons = 0;
    for (size_t c = 0; c < cores_.size(); ++c) {
        const CoreSpec& spec = program_.cores[c];
        Core& core = cores_[c];
        core.layer = spec.layer;
        depth_ = std::max<uint32_t>(depth_, spec.layer + 1u);
        const size_t n = spec.neurons.size();
        max_neurons = std::max(max_neurons, n);
        core.pos.assign(n * simd::kLineWords, 0);
        core.neg.assign(n * simd::kLineWords, 0);
        for (size_t i = 0; i < n; ++i) {
            const NeuronSpec& ns = spec.neurons[i];
            core.thresholds.push_back(ns.threshold);
            core.neuron_ids.push_back(ns.id);
            if (ns.threshold < 0) core.quiescent.push_back(static_cast<uint32_t>(i));
            for (size_t line = 0; line < ns.weights.size(); ++line) {
                const uint64_t bit = uint64_t{1} << (line % 64);
                if (ns.weights[line] > 0) core.pos[i * simd::kLineWords + line / 64] |= bit;
                if (ns.weights[line] < 0) core.neg[i * simd::kLineWords + line / 64] |= bit;
            }
        }
    }
    order_.resize(cores_.size());
    std::iota(order_.begin(), order_.end(), size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](size_t a, size_t b) { return cores_[a].layer < cores_[b].layer; });
    pending_.assign(cores_.size(), Lines{});
    if (options_.pipelined) staged_.assign(cores_.size(), Lines{});
    class_of_.assign(program_.physical_neurons(), -1);
    for (const OutputRef& o : program_.output_map) class_of_[o.neuron] = o.class_index;
    sums_.resize(max_neurons);
}

void ChipState::inject_spikes(std::span<const SpikeEvent> spikes) {
    const Shape3& s = program_.input_shape;
    for (const SpikeEvent& e : spikes)
        if (!s.contains(e.x, e.y, e.f))
            throw RangeError("spike (" + std::to_string(e.x) + "," + std::to_string(e.y) + "," +
                             std::to_string(e.f) + ") outside input " + to_string(s));
    for (const SpikeEvent& e : spikes)
        for (const LineRef& t : program_.input_map[s.index(e.x, e.y, e.f)])
            pending_[t.core][t.line / 64] |= uint64_t{1} << (t.line % 64);
    stats_.input_spikes += spikes.size();
}

void ChipState::evaluate(size_t c, const Lines& lines, std::vector<Lines>& dest, std::vector<uint32_t>& counts) {
    Core& core = cores_[c];
    auto fire = [&](uint32_t local) {
        const uint32_t id = core.neuron_ids[local];
        ++stats_.neuron_spikes;
        if (class_of_[id] >= 0) ++counts[static_cast<size_t>(class_of_[id])];
        for (const LineRef& t : program_.routing[id]) {
            dest[t.core][t.line / 64] |= uint64_t{1} << (t.line % 64);
            ++stats_.spikes_routed;
        }
    };
    const bool idle = std::all_of(lines.begin(), lines.end(), [](uint64_t w) { return w == 0; });
    if (idle && options_.event_driven) {
        // All sums are zero, so exactly the negative-threshold neurons fire.
        ++stats_.cores_skipped;
        for (uint32_t local : core.quiescent) fire(local);
        return;
    }
    ++stats_.cores_evaluated;
    const size_t n = core.thresholds.size();
    simd::crossbar_sums(options_.isa, lines.data(), core.pos.data(), core.neg.data(), n, sums_.data());
    for (size_t i = 0; i < n; ++i)
        if (sums_[i] > core.thresholds[i]) fire(static_cast<uint32_t>(i));
}

ClassHistogram ChipState::tick() {
    ClassHistogram h;
    h.tick = tick_;
    h.counts.assign(program_.num_classes, 0);
    if (options_.pipelined) {
        // Every core consumes the lines latched last tick; its spikes land in
        // the next tick's bitmaps, so each layer adds one tick of latency.
        for (size_t c : order_) {
            const Lines lines = pending_[c];
            pending_[c] = Lines{};
            evaluate(c, lines, staged_, h.counts);
        }
        // Inputs injected after this tick join the staged lines.
        std::swap(pending_, staged_);
    } else {
        for (size_t c : order_) {
            const Lines lines = pending_[c];
            pending_[c] = Lines{};
            evaluate(c, lines, pending_, h.counts);
        }
    }
    ++tick_;
    ++stats_.ticks;
    return h;
}

std::vector<ClassHistogram> ChipState::run_frames(const std::vector<std::vector<SpikeEvent>>& frames) {
    std::vector<ClassHistogram> out;
    out.reserve(frames.size());
    const uint32_t lag = latency();
    for (size_t i = 0; i < frames.size() + lag; ++i) {
        if (i < frames.size()) inject_spikes(frames[i]);
        ClassHistogram h = tick();
        if (i >= lag) {
            h.tick -= lag;
            out.push_back(std::move(h));
        }
    }
    return out;
}

std::vector<uint8_t> ChipState::snapshot() const {
    ByteWriter w;
    w.u32(tick_);
    for (const auto* buf : {&pending_, &staged_})
        for (const Lines& l : *buf)
            for (uint64_t word : l) {
                w.u32(static_cast<uint32_t>(word));
                w.u32(static_cast<uint32_t>(word >> 32));
            }
    return w.take();
}

std::vector<ClassHistogram> run_frames(const CoreletProgram& program,
                                       const std::vector<std::vector<SpikeEvent>>& frames,
                                       const SimOptions& options) {
    ChipState state(program, options);
    return state.run_frames(frames);
}

LocalChip::LocalChip(CoreletProgram program, simd::Isa isa) : state_(std::move(program), SimOptions{false, true, isa}) {}

ClassHistogram LocalChip::classify(const std::vector<SpikeEvent>& spikes, uint32_t tick) {
    state_.inject_spikes(spikes);
    ClassHistogram h = state_.tick();
    h.tick = tick;
    return h;
}

}  // namespace neurotrail
