#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurotrail/trinary_net.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail {

inline constexpr int kCoreLines = 256;
inline constexpr int kCoreNeurons = 256;
inline constexpr size_t kChipCores = 4096;
inline constexpr size_t kChipNeurons = kChipCores * kCoreNeurons;  // 1,048,576

// What drives one crossbar input line: an external input coordinate (flat
// Shape3 index of the input volume) or a physical neuron.
struct LineSource {
    enum class Kind : uint8_t { External = 0, Neuron = 1 };
    Kind kind = Kind::External;
    uint32_t id = 0;
    friend bool operator==(const LineSource&, const LineSource&) = default;
};

struct NeuronSpec {
    uint32_t id = 0;  // physical neuron id
    int32_t threshold = 0;
    std::vector<int8_t> weights;  // one per input line of the owning core
    friend bool operator==(const NeuronSpec&, const NeuronSpec&) = default;
};

struct CoreSpec {
    uint32_t core_id = 0;
    uint16_t layer = 0;  // on-chip layer index, 0 = first on-chip layer
    std::vector<LineSource> input_lines;
    std::vector<NeuronSpec> neurons;
    friend bool operator==(const CoreSpec&, const CoreSpec&) = default;
};

struct LineRef {
    uint32_t core = 0;
    uint16_t line = 0;
    friend bool operator==(const LineRef&, const LineRef&) = default;
    friend auto operator<=>(const LineRef&, const LineRef&) = default;
};

struct OutputRef {
    uint32_t neuron = 0;
    uint8_t class_index = 0;
    friend bool operator==(const OutputRef&, const OutputRef&) = default;
};

struct CoreletProgram {
    Shape3 input_shape;
    uint16_t num_classes = 0;
    uint16_t num_layers = 0;
    bool paired_lines = false;
    uint32_t logical_neurons = 0;
    std::vector<CoreSpec> cores;
    std::vector<std::vector<LineRef>> routing;       // physical neuron -> target lines
    std::vector<uint32_t> logical_of;                // physical neuron -> logical neuron
    std::vector<std::vector<uint32_t>> duplicate_groups;  // physical copies of one logical neuron (size >= 2)
    std::vector<std::vector<LineRef>> input_map;     // flat input index -> target lines
    std::vector<OutputRef> output_map;

    size_t physical_neurons() const { return routing.size(); }
    friend bool operator==(const CoreletProgram&, const CoreletProgram&) = default;
};

enum class DuplicatePlacement : uint8_t {
    SameCore,      // copies packed next to the original, overflowing into replica cores
    SeparateCore,  // copy k of every neuron in a tile lives on replica core k
};

struct CompileOptions {
    int core_lines = kCoreLines;
    int core_neurons = kCoreNeurons;
    size_t max_cores = kChipCores;
    // Model the hardware's two-line encoding of a trinary synapse: each
    // source occupies a +1 line and a -1 line.
    bool paired_lines = false;
    DuplicatePlacement placement = DuplicatePlacement::SameCore;
};

// Throws CompileError for a layer whose fan-in does not fit a core and
// CapacityError when the core budget is exceeded.
CoreletProgram compile(const TrinaryNetworkSpec& spec, const CompileOptions& options = {});

// Every broken invariant, one message each; empty means valid.
std::vector<std::string> validate(const CoreletProgram& program);

struct LayerUtilization {
    size_t cores = 0;
    size_t physical_neurons = 0;
    size_t logical_neurons = 0;
};

struct UtilizationReport {
    size_t cores = 0;
    size_t physical_neurons = 0;
    size_t logical_neurons = 0;
    size_t synapses = 0;  // nonzero crossbar entries
    double mean_line_occupancy = 0;  // mean over cores of lines used / 256
    double duplicate_overhead = 0;   // physical / logical neurons
    std::vector<LayerUtilization> layers;

    std::string to_text() const;
    std::string to_json() const;
};

UtilizationReport report(const CoreletProgram& program);

inline constexpr uint16_t kProgramFormatVersion = 1;
std::vector<uint8_t> serialize_program(const CoreletProgram& program);
CoreletProgram deserialize_program(std::span<const uint8_t> bytes);
void save_program(const CoreletProgram& program, const std::string& path);
CoreletProgram load_program_file(const std::string& path);

}  // namespace neurotrail
