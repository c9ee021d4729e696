#include <algorithm>

#include "neurotrail/corelet.hpp"
#include "neurotrail/error.hpp"

namespace neurotrail {

namespace {

struct SourceRef {
    bool external = false;
    uint32_t id = 0;  // flat input index, or global logical neuron id
};

// A block of output neurons of one layer that share one set of input lines.
// Every replica core of a tile carries the same lines and weight rows.
struct Tile {
    int group = 0;
    int f0 = 0, f1 = 0;
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    int ix0 = 0, iy0 = 0, pw = 0, ph = 0;
    std::vector<SourceRef> sources;
    std::vector<uint32_t> neurons;  // global logical ids
    std::vector<std::vector<int8_t>> rows;
    std::vector<int32_t> thresholds;
    // replica -> (index into neurons, copy number)
    std::vector<std::vector<std::pair<uint32_t, uint32_t>>> replicas;
    size_t first_core = 0;
};

struct LayerPlan {
    size_t spec_index = 0;
    Shape3 in;
    Shape3 out;
    uint32_t offset = 0;  // first global logical id
    std::vector<Tile> tiles;
};

std::pair<int, int> choose_tile(const LayerSpec& l, const Shape3& in, const Shape3& out, int fchunk,
                                const CompileOptions& opt, int lps) {
    int best_w = 1, best_h = 1;
    for (int th = 1; th <= out.height; ++th) {
        for (int tw = 1; tw <= out.width; ++tw) {
            if (tw * th * fchunk > opt.core_neurons) break;
            const int pw = std::min((tw - 1) * l.stride + l.kw, in.width);
            const int ph = std::min((th - 1) * l.stride + l.kh, in.height);
            if (pw * ph * l.in_per_group() * lps > opt.core_lines) break;
            if (tw * th > best_w * best_h || (tw * th == best_w * best_h && tw > best_w)) {
                best_w = tw;
                best_h = th;
            }
        }
    }
    return {best_w, best_h};
}

void plan_tiles(const TrinaryNetworkSpec& spec, LayerPlan& plan, const LayerPlan* prev, const CompileOptions& opt) {
    const LayerSpec& l = spec.layers[plan.spec_index];
    const int lps = opt.paired_lines ? 2 : 1;
    if (l.fan_in() * lps > opt.core_lines)
        throw CompileError("layer " + std::to_string(plan.spec_index) + ": fan-in " + std::to_string(l.fan_in()) +
                           (opt.paired_lines ? " (paired lines)" : "") + " needs " +
                           std::to_string(l.fan_in() * lps) + " input lines, a core has " +
                           std::to_string(opt.core_lines));
    const int cg = l.in_per_group();
    const int og = l.out_per_group();
    const int fchunk = std::min(og, opt.core_neurons);
    const auto [tw, th] = choose_tile(l, plan.in, plan.out, fchunk, opt, lps);

    for (int g = 0; g < l.feature_groups; ++g) {
        for (int f0 = g * og; f0 < (g + 1) * og; f0 += fchunk) {
            for (int y0 = 0; y0 < plan.out.height; y0 += th) {
                for (int x0 = 0; x0 < plan.out.width; x0 += tw) {
                    Tile t;
                    t.group = g;
                    t.f0 = f0;
                    t.f1 = std::min(f0 + fchunk, (g + 1) * og);
                    t.x0 = x0;
                    t.x1 = std::min(x0 + tw, plan.out.width);
                    t.y0 = y0;
                    t.y1 = std::min(y0 + th, plan.out.height);
                    t.ix0 = std::max(0, x0 * l.stride - l.padding);
                    t.iy0 = std::max(0, y0 * l.stride - l.padding);
                    const int ix1 = std::min(plan.in.width, (t.x1 - 1) * l.stride - l.padding + l.kw);
                    const int iy1 = std::min(plan.in.height, (t.y1 - 1) * l.stride - l.padding + l.kh);
                    t.pw = std::max(0, ix1 - t.ix0);
                    t.ph = std::max(0, iy1 - t.iy0);

                    for (int iy = t.iy0; iy < t.iy0 + t.ph; ++iy)
                        for (int ix = t.ix0; ix < t.ix0 + t.pw; ++ix)
                            for (int c = 0; c < cg; ++c) {
                                const auto flat = static_cast<uint32_t>(plan.in.index(ix, iy, g * cg + c));
                                if (prev) t.sources.push_back({false, prev->offset + flat});
                                else t.sources.push_back({true, flat});
                            }

                    const size_t lines = t.sources.size() * lps;
                    for (int o = t.f0; o < t.f1; ++o) {
                        for (int oy = t.y0; oy < t.y1; ++oy) {
                            for (int ox = t.x0; ox < t.x1; ++ox) {
                                t.neurons.push_back(plan.offset + static_cast<uint32_t>(plan.out.index(ox, oy, o)));
                                t.thresholds.push_back(l.thresholds[o]);
                                std::vector<int8_t> row(lines, 0);
                                for (int ky = 0; ky < l.kh; ++ky) {
                                    const int iy = oy * l.stride - l.padding + ky;
                                    if (iy < 0 || iy >= plan.in.height) continue;
                                    for (int kx = 0; kx < l.kw; ++kx) {
                                        const int ix = ox * l.stride - l.padding + kx;
                                        if (ix < 0 || ix >= plan.in.width) continue;
                                        for (int c = 0; c < cg; ++c) {
                                            const int8_t w = l.weight(o, ky, kx, c);
                                            if (w == 0) continue;
                                            const size_t s = (static_cast<size_t>(iy - t.iy0) * t.pw + (ix - t.ix0)) * cg + c;
                                            if (opt.paired_lines) row[2 * s + (w < 0 ? 1 : 0)] = w;
                                            else row[s] = w;
                                        }
                                    }
                                }
                                t.rows.push_back(std::move(row));
                            }
                        }
                    }
                    plan.tiles.push_back(std::move(t));
                }
            }
        }
    }
}

// Copies each logical neuron of `plan` once per consuming core and packs the
// copies into replica cores.
void place_copies(LayerPlan& plan, const std::vector<std::vector<std::pair<size_t, size_t>>>& consumers,
                  const CompileOptions& opt) {
    for (Tile& t : plan.tiles) {
        std::vector<uint32_t> copies(t.neurons.size());
        for (size_t i = 0; i < t.neurons.size(); ++i)
            copies[i] = static_cast<uint32_t>(std::max<size_t>(1, consumers[t.neurons[i] - plan.offset].size()));
        t.replicas.clear();
        if (opt.placement == DuplicatePlacement::SeparateCore) {
            const uint32_t n = *std::max_element(copies.begin(), copies.end());
            t.replicas.resize(n);
            for (uint32_t k = 0; k < n; ++k)
                for (size_t i = 0; i < t.neurons.size(); ++i)
                    if (copies[i] > k) t.replicas[k].emplace_back(static_cast<uint32_t>(i), k);
        } else {
            t.replicas.emplace_back();
            for (size_t i = 0; i < t.neurons.size(); ++i)
                for (uint32_t k = 0; k < copies[i]; ++k) {
                    if (t.replicas.back().size() == static_cast<size_t>(opt.core_neurons)) t.replicas.emplace_back();
                    t.replicas.back().emplace_back(static_cast<uint32_t>(i), k);
                }
        }
    }
}

}  // namespace

CoreletProgram compile(const TrinaryNetworkSpec& spec, const CompileOptions& opt) {
    spec.validate();
    if (opt.core_lines < 1 || opt.core_lines > kCoreLines || opt.core_neurons < 1 || opt.core_neurons > kCoreNeurons)
        throw CompileError("core geometry must be within 256 lines x 256 neurons");

    std::vector<LayerPlan> plans;
    uint32_t offset = 0;
    for (size_t i = spec.first_core_layer(); i < spec.layers.size(); ++i) {
        LayerPlan p;
        p.spec_index = i;
        p.in = spec.layer_input_shape(i);
        p.out = spec.layer_output_shape(i);
        p.offset = offset;
        offset += static_cast<uint32_t>(p.out.size());
        plans.push_back(std::move(p));
    }
    for (size_t k = 0; k < plans.size(); ++k) plan_tiles(spec, plans[k], k ? &plans[k - 1] : nullptr, opt);

    // Consumers are known only once the next layer's replica count is fixed,
    // so placement runs from the output layer backwards.
    for (size_t k = plans.size(); k-- > 0;) {
        std::vector<std::vector<std::pair<size_t, size_t>>> consumers(plans[k].out.size());
        if (k + 1 < plans.size()) {
            const LayerPlan& next = plans[k + 1];
            for (size_t t = 0; t < next.tiles.size(); ++t)
                for (size_t r = 0; r < next.tiles[t].replicas.size(); ++r)
                    for (const SourceRef& s : next.tiles[t].sources)
                        consumers[s.id - plans[k].offset].emplace_back(t, r);
        }
        place_copies(plans[k], consumers, opt);
    }

    size_t total_cores = 0;
    for (auto& p : plans)
        for (auto& t : p.tiles) {
            t.first_core = total_cores;
            total_cores += t.replicas.size();
        }
    if (total_cores > opt.max_cores)
        throw CapacityError("network needs " + std::to_string(total_cores) + " cores, budget is " +
                            std::to_string(opt.max_cores));

    CoreletProgram prog;
    prog.input_shape = spec.core_input_shape();
    prog.num_classes = static_cast<uint16_t>(spec.class_populations.size());
    prog.num_layers = static_cast<uint16_t>(plans.size());
    prog.paired_lines = opt.paired_lines;
    prog.logical_neurons = offset;
    prog.input_map.resize(prog.input_shape.size());
    const int lps = opt.paired_lines ? 2 : 1;

    // Physical ids follow core order; record which physical copy serves
    // which consumer (tile, replica) so lines can be wired afterwards.
    std::vector<std::vector<uint32_t>> copy_ids(offset);
    for (size_t k = 0; k < plans.size(); ++k) {
        for (Tile& t : plans[k].tiles) {
            for (size_t r = 0; r < t.replicas.size(); ++r) {
                CoreSpec core;
                core.core_id = static_cast<uint32_t>(prog.cores.size());
                core.layer = static_cast<uint16_t>(k);
                core.input_lines.resize(t.sources.size() * lps);
                for (auto [i, copy] : t.replicas[r]) {
                    const uint32_t phys = static_cast<uint32_t>(prog.routing.size());
                    prog.routing.emplace_back();
                    prog.logical_of.push_back(t.neurons[i]);
                    auto& ids = copy_ids[t.neurons[i]];
                    if (ids.size() <= copy) ids.resize(copy + 1);
                    ids[copy] = phys;
                    core.neurons.push_back({phys, t.thresholds[i], t.rows[i]});
                }
                prog.cores.push_back(std::move(core));
            }
        }
    }

    // Wire every line: external inputs through input_map, neuron sources
    // through the copy that was reserved for this consumer.
    for (size_t k = 0; k < plans.size(); ++k) {
        std::vector<uint32_t> next_copy;
        if (k > 0) next_copy.assign(plans[k - 1].out.size(), 0);
        for (Tile& t : plans[k].tiles) {
            for (size_t r = 0; r < t.replicas.size(); ++r) {
                const uint32_t core_id = static_cast<uint32_t>(t.first_core + r);
                CoreSpec& core = prog.cores[core_id];
                for (size_t s = 0; s < t.sources.size(); ++s) {
                    const SourceRef& src = t.sources[s];
                    LineSource ls;
                    if (src.external) {
                        ls = {LineSource::Kind::External, src.id};
                    } else {
                        const uint32_t local = src.id - plans[k - 1].offset;
                        ls = {LineSource::Kind::Neuron, copy_ids[src.id][next_copy[local]++]};
                    }
                    for (int p = 0; p < lps; ++p) {
                        const uint16_t line = static_cast<uint16_t>(s * lps + p);
                        core.input_lines[line] = ls;
                        if (src.external) prog.input_map[src.id].push_back({core_id, line});
                        else prog.routing[ls.id].push_back({core_id, line});
                    }
                }
            }
        }
    }

    std::vector<std::vector<uint32_t>> logical_members(offset);
    for (uint32_t phys = 0; phys < prog.logical_of.size(); ++phys) logical_members[prog.logical_of[phys]].push_back(phys);
    for (auto& m : logical_members)
        if (m.size() > 1) prog.duplicate_groups.push_back(std::move(m));

    const LayerPlan& last = plans.back();
    std::vector<int> class_of(last.out.size(), -1);
    for (size_t c = 0; c < spec.class_populations.size(); ++c)
        for (uint32_t id : spec.class_populations[c]) class_of[id] = static_cast<int>(c);
    for (uint32_t phys = 0; phys < prog.logical_of.size(); ++phys) {
        const uint32_t logical = prog.logical_of[phys];
        if (logical >= last.offset)
            prog.output_map.push_back({phys, static_cast<uint8_t>(class_of[logical - last.offset])});
    }
    return prog;
}

}  // namespace neurotrail
