#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>

#include "json.hpp"

#include "neurotrail/bytes.hpp"
#include "neurotrail/corelet.hpp"
#include "neurotrail/error.hpp"

namespace neurotrail {

std::vector<std::string> validate(const CoreletProgram& p) {
    std::vector<std::string> v;
    auto core_msg = [](uint32_t c, const std::string& what) { return "core " + std::to_string(c) + ": " + what; };

    if (p.cores.size() > kChipCores)
        v.push_back("program uses " + std::to_string(p.cores.size()) + " cores, chip has " + std::to_string(kChipCores));
    const size_t n_phys = p.routing.size();
    if (n_phys > kChipNeurons)
        v.push_back("program uses " + std::to_string(n_phys) + " neurons, chip has " + std::to_string(kChipNeurons));
    if (p.logical_of.size() != n_phys)
        v.push_back("logical map covers " + std::to_string(p.logical_of.size()) + " of " + std::to_string(n_phys) +
                    " physical neurons");

    // Where each physical neuron lives, for cross-checks below.
    std::vector<int64_t> home(n_phys, -1);
    std::vector<const NeuronSpec*> spec_of(n_phys, nullptr);
    for (size_t ci = 0; ci < p.cores.size(); ++ci) {
        const CoreSpec& c = p.cores[ci];
        const uint32_t id = static_cast<uint32_t>(ci);
        if (c.core_id != id) v.push_back(core_msg(id, "core_id field is " + std::to_string(c.core_id)));
        if (c.input_lines.size() > static_cast<size_t>(kCoreLines))
            v.push_back(core_msg(id, std::to_string(c.input_lines.size()) + " input lines exceed " +
                                         std::to_string(kCoreLines)));
        if (c.neurons.size() > static_cast<size_t>(kCoreNeurons))
            v.push_back(core_msg(id, std::to_string(c.neurons.size()) + " neurons exceed " + std::to_string(kCoreNeurons)));
        if (c.layer >= p.num_layers) v.push_back(core_msg(id, "layer index out of range"));
        for (const NeuronSpec& n : c.neurons) {
            if (n.weights.size() != c.input_lines.size())
                v.push_back(core_msg(id, "neuron " + std::to_string(n.id) + " has a weight row of " +
                                             std::to_string(n.weights.size()) + " for " +
                                             std::to_string(c.input_lines.size()) + " lines"));
            if (std::any_of(n.weights.begin(), n.weights.end(), [](int8_t w) { return w < -1 || w > 1; }))
                v.push_back(core_msg(id, "neuron " + std::to_string(n.id) + " has a non-trinary weight"));
            if (n.id >= n_phys) {
                v.push_back(core_msg(id, "neuron id " + std::to_string(n.id) + " out of range"));
            } else if (home[n.id] >= 0) {
                v.push_back(core_msg(id, "neuron " + std::to_string(n.id) + " already placed on core " +
                                             std::to_string(home[n.id])));
            } else {
                home[n.id] = id;
                spec_of[n.id] = &n;
            }
        }
        for (size_t line = 0; line < c.input_lines.size(); ++line) {
            const LineSource& s = c.input_lines[line];
            const LineRef ref{id, static_cast<uint16_t>(line)};
            if (s.kind == LineSource::Kind::External) {
                if (s.id >= p.input_map.size() ||
                    std::find(p.input_map[s.id].begin(), p.input_map[s.id].end(), ref) == p.input_map[s.id].end())
                    v.push_back(core_msg(id, "line " + std::to_string(line) + " is not fed by the input map"));
            } else if (s.id >= n_phys ||
                       std::find(p.routing[s.id].begin(), p.routing[s.id].end(), ref) == p.routing[s.id].end()) {
                v.push_back(core_msg(id, "line " + std::to_string(line) + " is not fed by neuron " + std::to_string(s.id)));
            }
        }
    }
    for (size_t n = 0; n < n_phys; ++n)
        if (home[n] < 0) v.push_back("neuron " + std::to_string(n) + " is not placed on any core");

    auto check_target = [&](const LineRef& t, LineSource expect, const std::string& who) {
        if (t.core >= p.cores.size() || t.line >= p.cores[t.core].input_lines.size()) {
            v.push_back(who + " targets missing line " + std::to_string(t.core) + ":" + std::to_string(t.line));
            return false;
        }
        if (!(p.cores[t.core].input_lines[t.line] == expect)) {
            v.push_back(who + " targets line " + std::to_string(t.core) + ":" + std::to_string(t.line) +
                        " owned by another source");
            return false;
        }
        return true;
    };
    for (size_t n = 0; n < n_phys; ++n) {
        const auto& targets = p.routing[n];
        const std::string who = "neuron " + std::to_string(n);
        std::set<uint32_t> target_cores;
        for (const LineRef& t : targets) {
            if (!check_target(t, {LineSource::Kind::Neuron, static_cast<uint32_t>(n)}, who)) continue;
            target_cores.insert(t.core);
            if (home[n] >= 0 && p.cores[t.core].layer <= p.cores[home[n]].layer)
                v.push_back(who + " feeds core " + std::to_string(t.core) + " which is not in a later layer");
        }
        if (target_cores.size() > 1) v.push_back(who + " fans out to " + std::to_string(target_cores.size()) + " cores");
    }
    if (p.input_map.size() != p.input_shape.size())
        v.push_back("input map covers " + std::to_string(p.input_map.size()) + " of " +
                    std::to_string(p.input_shape.size()) + " input coordinates");
    for (size_t i = 0; i < p.input_map.size(); ++i)
        for (const LineRef& t : p.input_map[i])
            check_target(t, {LineSource::Kind::External, static_cast<uint32_t>(i)}, "input " + std::to_string(i));

    std::vector<uint8_t> grouped(n_phys, 0);
    for (size_t g = 0; g < p.duplicate_groups.size(); ++g) {
        const auto& members = p.duplicate_groups[g];
        const std::string who = "duplicate group " + std::to_string(g);
        if (members.size() < 2) v.push_back(who + " has fewer than two members");
        bool ok = true;
        for (uint32_t m : members)
            if (m >= n_phys || !spec_of[m] || m >= p.logical_of.size()) ok = false;
        if (!ok) {
            v.push_back(who + " references an unknown neuron");
            continue;
        }
        const NeuronSpec& first = *spec_of[members.front()];
        for (uint32_t m : members) {
            grouped[m] = 1;
            if (p.logical_of[m] != p.logical_of[members.front()]) v.push_back(who + " mixes logical neurons");
            if (spec_of[m]->threshold != first.threshold) v.push_back(who + ": neuron " + std::to_string(m) + " threshold differs");
            if (spec_of[m]->weights != first.weights) v.push_back(who + ": neuron " + std::to_string(m) + " weight row differs");
        }
    }

    std::vector<uint32_t> copies(p.logical_neurons, 0);
    for (size_t n = 0; n < p.logical_of.size(); ++n) {
        if (p.logical_of[n] >= p.logical_neurons) v.push_back("neuron " + std::to_string(n) + " maps to an unknown logical neuron");
        else ++copies[p.logical_of[n]];
    }
    for (size_t n = 0; n < p.logical_of.size(); ++n)
        if (p.logical_of[n] < p.logical_neurons && copies[p.logical_of[n]] > 1 && !grouped[n])
            v.push_back("neuron " + std::to_string(n) + " is a copy but not in a duplicate group");
    size_t missing = std::count(copies.begin(), copies.end(), 0u);
    if (missing) v.push_back(std::to_string(missing) + " logical neurons have no physical neuron");

    for (const OutputRef& o : p.output_map) {
        if (o.neuron >= n_phys) v.push_back("output map references unknown neuron " + std::to_string(o.neuron));
        if (o.class_index >= p.num_classes) v.push_back("output neuron " + std::to_string(o.neuron) + " has class out of range");
    }
    return v;
}

UtilizationReport report(const CoreletProgram& p) {
    UtilizationReport r;
    r.cores = p.cores.size();
    r.physical_neurons = p.routing.size();
    r.logical_neurons = p.logical_neurons;
    r.layers.resize(p.num_layers);
    double occupancy = 0;
    for (const CoreSpec& c : p.cores) {
        occupancy += static_cast<double>(c.input_lines.size()) / kCoreLines;
        if (c.layer < r.layers.size()) {
            r.layers[c.layer].cores += 1;
            r.layers[c.layer].physical_neurons += c.neurons.size();
        }
        for (const NeuronSpec& n : c.neurons)
            r.synapses += static_cast<size_t>(std::count_if(n.weights.begin(), n.weights.end(), [](int8_t w) { return w != 0; }));
    }
    std::vector<std::set<uint32_t>> logical(p.num_layers);
    for (const CoreSpec& c : p.cores)
        for (const NeuronSpec& n : c.neurons)
            if (c.layer < logical.size() && n.id < p.logical_of.size()) logical[c.layer].insert(p.logical_of[n.id]);
    for (size_t l = 0; l < logical.size(); ++l) r.layers[l].logical_neurons = logical[l].size();
    r.mean_line_occupancy = r.cores ? occupancy / static_cast<double>(r.cores) : 0;
    r.duplicate_overhead = r.logical_neurons ? static_cast<double>(r.physical_neurons) / r.logical_neurons : 0;
    return r;
}

std::string UtilizationReport::to_text() const {
    std::ostringstream o;
    o << "cores used:            " << cores << " / " << kChipCores << "\n"
      << "neurons used:          " << physical_neurons << " / " << kChipNeurons << "\n"
      << "logical neurons:       " << logical_neurons << "\n"
      << "synapses:              " << synapses << "\n"
      << "mean line occupancy:   " << mean_line_occupancy << "\n"
      << "duplicate overhead:    " << duplicate_overhead << "\n";
    for (size_t l = 0; l < layers.size(); ++l)
        o << "  layer " << l << ": cores " << layers[l].cores << ", neurons " << layers[l].physical_neurons
          << " (" << layers[l].logical_neurons << " logical)\n";
    return o.str();
}

std::string UtilizationReport::to_json() const {
    nlohmann::json j;
    j["cores"] = cores;
    j["physical_neurons"] = physical_neurons;
    j["logical_neurons"] = logical_neurons;
    j["synapses"] = synapses;
    j["mean_line_occupancy"] = mean_line_occupancy;
    j["duplicate_overhead"] = duplicate_overhead;
    for (const auto& l : layers)
        j["layers"].push_back({{"cores", l.cores}, {"physical_neurons", l.physical_neurons}, {"logical_neurons", l.logical_neurons}});
    return j.dump();
}

namespace {

constexpr char kMagic[4] = {'T', 'N', 'C', 'P'};

void put_refs(ByteWriter& w, const std::vector<LineRef>& refs) {
    if (refs.size() > 0xFFFF) throw ValidationError("too many line targets for one source");
    w.u16(static_cast<uint16_t>(refs.size()));
    for (const LineRef& r : refs) {
        w.u32(r.core);
        w.u16(r.line);
    }
}

std::vector<LineRef> get_refs(ByteReader& r) {
    const uint16_t n = r.u16();
    if (static_cast<size_t>(n) * 6 > r.remaining()) throw ParseError("truncated line target list");
    std::vector<LineRef> refs(n);
    for (auto& ref : refs) {
        ref.core = r.u32();
        ref.line = r.u16();
    }
    return refs;
}

uint32_t get_count(ByteReader& r, size_t min_item_bytes, const char* what) {
    const uint32_t n = r.u32();
    if (static_cast<size_t>(n) * min_item_bytes > r.remaining()) throw ParseError(std::string("truncated ") + what);
    return n;
}

}  // namespace

std::vector<uint8_t> serialize_program(const CoreletProgram& p) {
    ByteWriter w;
    w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
    w.u16(kProgramFormatVersion);
    w.u8(p.paired_lines ? 1 : 0);
    w.u16(static_cast<uint16_t>(p.input_shape.width));
    w.u16(static_cast<uint16_t>(p.input_shape.height));
    w.u16(static_cast<uint16_t>(p.input_shape.features));
    w.u16(p.num_classes);
    w.u16(p.num_layers);
    w.u32(p.logical_neurons);
    w.u32(static_cast<uint32_t>(p.cores.size()));
    for (const CoreSpec& c : p.cores) {
        if (c.input_lines.size() > 0xFFFF || c.neurons.size() > 0xFFFF) throw ValidationError("core too large to encode");
        w.u16(c.layer);
        w.u16(static_cast<uint16_t>(c.input_lines.size()));
        for (const LineSource& s : c.input_lines) {
            w.u8(static_cast<uint8_t>(s.kind));
            w.u32(s.id);
        }
        w.u16(static_cast<uint16_t>(c.neurons.size()));
        for (const NeuronSpec& n : c.neurons) {
            if (n.weights.size() != c.input_lines.size()) throw ValidationError("weight row length mismatch");
            w.u32(n.id);
            w.i32(n.threshold);
            for (size_t i = 0; i < n.weights.size(); i += 4) {
                uint8_t packed = 0;
                for (size_t k = 0; k < 4 && i + k < n.weights.size(); ++k) {
                    const int8_t v = n.weights[i + k];
                    if (v < -1 || v > 1) throw ValidationError("non-trinary weight");
                    packed |= static_cast<uint8_t>((v == 0 ? 0 : (v > 0 ? 1 : 2)) << (2 * k));
                }
                w.u8(packed);
            }
        }
    }
    w.u32(static_cast<uint32_t>(p.routing.size()));
    for (size_t n = 0; n < p.routing.size(); ++n) {
        w.u32(n < p.logical_of.size() ? p.logical_of[n] : 0xFFFFFFFFu);
        put_refs(w, p.routing[n]);
    }
    w.u32(static_cast<uint32_t>(p.duplicate_groups.size()));
    for (const auto& g : p.duplicate_groups) {
        w.u32(static_cast<uint32_t>(g.size()));
        for (uint32_t id : g) w.u32(id);
    }
    w.u32(static_cast<uint32_t>(p.input_map.size()));
    for (const auto& refs : p.input_map) put_refs(w, refs);
    w.u32(static_cast<uint32_t>(p.output_map.size()));
    for (const OutputRef& o : p.output_map) {
        w.u32(o.neuron);
        w.u8(o.class_index);
    }
    return w.take();
}

CoreletProgram deserialize_program(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    if (std::memcmp(r.bytes(4).data(), kMagic, 4) != 0) throw ParseError("not a TNCP program file");
    const uint16_t version = r.u16();
    if (version != kProgramFormatVersion)
        throw UnsupportedVersionError("program format version " + std::to_string(version) + " is not supported");
    CoreletProgram p;
    p.paired_lines = r.u8() != 0;
    p.input_shape.width = r.u16();
    p.input_shape.height = r.u16();
    p.input_shape.features = r.u16();
    p.num_classes = r.u16();
    p.num_layers = r.u16();
    p.logical_neurons = r.u32();
    const uint32_t n_cores = get_count(r, 6, "core table");
    p.cores.resize(n_cores);
    for (uint32_t ci = 0; ci < n_cores; ++ci) {
        CoreSpec& c = p.cores[ci];
        c.core_id = ci;
        c.layer = r.u16();
        const uint16_t lines = r.u16();
        if (static_cast<size_t>(lines) * 5 > r.remaining()) throw ParseError("truncated line table");
        c.input_lines.resize(lines);
        for (auto& s : c.input_lines) {
            const uint8_t kind = r.u8();
            if (kind > 1) throw ParseError("unknown line source kind " + std::to_string(kind));
            s.kind = static_cast<LineSource::Kind>(kind);
            s.id = r.u32();
        }
        const uint16_t neurons = r.u16();
        const size_t row_bytes = (lines + 3u) / 4u;
        if (static_cast<size_t>(neurons) * (8 + row_bytes) > r.remaining()) throw ParseError("truncated neuron table");
        c.neurons.resize(neurons);
        for (auto& n : c.neurons) {
            n.id = r.u32();
            n.threshold = r.i32();
            auto packed = r.bytes(row_bytes);
            n.weights.resize(lines);
            for (size_t k = 0; k < lines; ++k) {
                const uint8_t code = (packed[k / 4] >> (2 * (k % 4))) & 3;
                if (code == 3) throw ParseError("invalid weight code in core " + std::to_string(ci));
                n.weights[k] = code == 0 ? 0 : (code == 1 ? 1 : -1);
            }
        }
    }
    const uint32_t n_phys = get_count(r, 6, "routing table");
    p.routing.resize(n_phys);
    p.logical_of.resize(n_phys);
    for (uint32_t n = 0; n < n_phys; ++n) {
        p.logical_of[n] = r.u32();
        p.routing[n] = get_refs(r);
    }
    const uint32_t n_groups = get_count(r, 4, "duplicate groups");
    p.duplicate_groups.resize(n_groups);
    for (auto& g : p.duplicate_groups) {
        g.resize(get_count(r, 4, "duplicate group"));
        for (auto& id : g) id = r.u32();
    }
    const uint32_t n_inputs = get_count(r, 2, "input map");
    p.input_map.resize(n_inputs);
    for (auto& refs : p.input_map) refs = get_refs(r);
    const uint32_t n_out = get_count(r, 5, "output map");
    p.output_map.resize(n_out);
    for (auto& o : p.output_map) {
        o.neuron = r.u32();
        o.class_index = r.u8();
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after program");
    return p;
}

void save_program(const CoreletProgram& program, const std::string& path) {
    write_file_bytes(path, serialize_program(program));
}

CoreletProgram load_program_file(const std::string& path) { return deserialize_program(read_file_bytes(path)); }

}  // namespace neurotrail
