#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurotrail/simd.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail {

enum class LayerKind : uint8_t { HostConv = 0, CoreConv = 1, CoreClassifier = 2 };

std::string_view layer_kind_name(LayerKind k);

// One convolution-shaped layer. Output feature o reads input group
// o / (out_features / feature_groups). Thresholds are per output feature and
// a neuron spikes iff its weighted input sum is strictly greater.
struct LayerSpec {
    LayerKind kind = LayerKind::CoreConv;
    int kh = 3;
    int kw = 3;
    int stride = 1;
    int padding = 0;
    int in_features = 0;
    int out_features = 0;
    int feature_groups = 1;
    std::vector<int32_t> thresholds;  // [out_features]
    std::vector<int8_t> weights;      // [out_features][kh][kw][in_features / feature_groups]

    int in_per_group() const { return in_features / feature_groups; }
    int out_per_group() const { return out_features / feature_groups; }
    int fan_in() const { return kh * kw * in_per_group(); }
    int group_of_output(int o) const { return o / out_per_group(); }
    bool on_chip() const { return kind != LayerKind::HostConv; }
    Shape3 output_shape(const Shape3& in) const;

    size_t weight_index(int o, int ky, int kx, int c) const {
        return ((static_cast<size_t>(o) * kh + ky) * kw + kx) * in_per_group() + c;
    }
    int8_t weight(int o, int ky, int kx, int c) const { return weights[weight_index(o, ky, kx, c)]; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline constexpr int kMaxFanIn = 256;

struct TrinaryNetworkSpec {
    Shape3 input_shape{44, 36, 3};
    std::vector<LayerSpec> layers;
    // Disjoint sets of final-layer neuron ids (flat Shape3 index), one per class.
    std::vector<std::vector<uint32_t>> class_populations;

    Shape3 layer_input_shape(size_t layer) const;
    Shape3 layer_output_shape(size_t layer) const;
    Shape3 output_shape() const { return layer_output_shape(layers.size() - 1); }
    // Index of the first on-chip layer and the binary shape it consumes.
    size_t first_core_layer() const;
    Shape3 core_input_shape() const { return layer_input_shape(first_core_layer()); }
    bool has_host_layer() const { return !layers.empty() && layers.front().kind == LayerKind::HostConv; }

    // Throws ValidationError describing the first broken invariant.
    void validate() const;
    // Non-fatal findings (e.g. a layer whose weights are all zero).
    std::vector<std::string> lint() const;

    friend bool operator==(const TrinaryNetworkSpec&, const TrinaryNetworkSpec&) = default;
};

// Binary activation volume, one byte per neuron (0 or 1), flat Shape3 order.
struct BinaryTensor {
    Shape3 shape;
    std::vector<uint8_t> bits;

    BinaryTensor() = default;
    explicit BinaryTensor(Shape3 s) : shape(s), bits(s.size(), 0) {}
    uint8_t at(int x, int y, int f) const { return bits[shape.index(x, y, f)]; }
    friend bool operator==(const BinaryTensor&, const BinaryTensor&) = default;
};

struct ForwardResult {
    std::vector<BinaryTensor> layer_spikes;  // one per on-chip layer
    ClassHistogram histogram;
};

// Precomputed crossbar masks for the on-chip layers of a spec. Evaluation is
// const and thread-safe.
class ReferenceNet {
public:
    explicit ReferenceNet(const TrinaryNetworkSpec& spec, simd::Isa isa = simd::active_isa());

    ForwardResult forward(const BinaryTensor& input) const;
    ClassHistogram histogram(const BinaryTensor& input) const { return forward(input).histogram; }
    const TrinaryNetworkSpec& spec() const { return spec_; }

private:
    struct LayerMasks {
        std::vector<uint64_t> pos;  // [out_features][kLineWords]
        std::vector<uint64_t> neg;
    };

    TrinaryNetworkSpec spec_;
    simd::Isa isa_;
    std::vector<LayerMasks> masks_;  // indexed by layer
};

ForwardResult forward(const TrinaryNetworkSpec& spec, const BinaryTensor& input);

// Per-population spike counts of a final-layer activation volume.
ClassHistogram count_populations(const TrinaryNetworkSpec& spec, const BinaryTensor& output);

// Training-time real-valued weights, one tensor per layer.
struct ShadowWeights {
    std::vector<std::vector<float>> layers;
    float tau_frac = 0.7f;
};

// w = +1 if s > tau, -1 if s < -tau, else 0, with tau = tau_frac * mean|s|.
// An all-zero tensor gives tau = 0 and therefore all zeros.
std::vector<int8_t> trinarize(std::span<const float> shadow, float tau_frac);
std::vector<std::vector<int8_t>> trinarize(const ShadowWeights& shadow);

struct ArchitectureOptions {
    int host_features = 12;
    std::vector<int> core_features{16, 32, 64};
    std::vector<int> core_groups{1, 1, 2};
    int classifier_groups = 2;
    int neurons_per_class = 30;
};

// Default stack: host 3x3 conv (3 -> 12, pad same), stride-2 3x3 core convs
// 12 -> 16 -> 32 -> 64 (6 x 5 at 44 x 36 input), and a classifier whose
// kernel spans a full row: 1 x 5 x 18 neurons, feature f voting for class
// f % 3, 30 neurons per class. Weights are zero and thresholds 0; training
// or `randomize` fills them.
TrinaryNetworkSpec make_default_architecture(const ArchitectureOptions& opt = {});

// Fills every weight uniformly from {-1, 0, 1} and thresholds from
// [theta_lo, theta_hi].
void randomize(TrinaryNetworkSpec& spec, uint64_t seed, int theta_lo = -1, int theta_hi = 2);

// Versioned binary model container ("TNET").
inline constexpr uint16_t kModelFormatVersion = 1;
std::vector<uint8_t> serialize_spec(const TrinaryNetworkSpec& spec);
TrinaryNetworkSpec deserialize_spec(std::span<const uint8_t> bytes);
void save_spec(const TrinaryNetworkSpec& spec, const std::string& path);
TrinaryNetworkSpec load_spec(const std::string& path);

}  // namespace neurotrail
