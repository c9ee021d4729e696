#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "neurotrail/image.hpp"
#include "neurotrail/trinary_net.hpp"

namespace neurotrail {

// A downsampled (44x36) image with its steering class.
struct LabeledImage {
    RgbImage image;
    int label = 0;
};

struct TrainConfig {
    ArchitectureOptions arch;
    int epochs = 30;
    int batch_size = 32;
    float learning_rate = 2e-2f;
    float tau_frac = 0.7f;
    // Softmax inputs are logit_scale * population spike count.
    float logit_scale = 0.3f;
    // Pre-activation is (sum - theta) / width; the surrogate gradient is 1
    // inside |pre-activation| <= 1. Widths: host layer (in centered-pixel
    // units) and on-chip layers (multiples of sqrt(fan-in)).
    float host_width = 256.f;
    float core_width_factor = 1.0f;
    uint64_t seed = 1;
    // Refuse a training set with a class that has no samples.
    bool require_all_classes = true;
    std::function<void(int epoch, double loss, double train_acc)> on_epoch;
};

struct ConfusionMatrix {
    std::array<std::array<uint32_t, kNumClasses>, kNumClasses> counts{};  // [truth][predicted]
    double accuracy() const;
    uint32_t total() const;
};

struct TrainReport {
    std::vector<double> loss_history;  // one entry per iteration
    int iterations = 0;
    double seconds = 0;
    ConfusionMatrix train_confusion;
    ConfusionMatrix test_confusion;
    double train_accuracy() const { return train_confusion.accuracy(); }
    double test_accuracy() const { return test_confusion.accuracy(); }
};

struct TrainResult {
    TrinaryNetworkSpec spec;
    ShadowWeights shadow;
    std::vector<std::vector<float>> normalized_bias;
    TrainReport report;
};

TrainResult train(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& test_set,
                  const TrainConfig& config);

// Accuracy of the deployed integer network (host conv + binary forward +
// tie-broken argmax) on 44x36 images.
ConfusionMatrix evaluate(const TrinaryNetworkSpec& spec, const std::vector<LabeledImage>& samples);

// Gradient-check support: a network evaluated in relaxed real-valued form
// (shadow weights used directly, hard-tanh activations) with softmax
// cross-entropy over population sums. Exposed so tests can compare the
// analytic backward pass against finite differences.
struct RelaxedProblem {
    TrinaryNetworkSpec spec;                    // geometry and populations; weights ignored
    std::vector<std::vector<double>> weights;   // per layer, LayerSpec::weights layout
    std::vector<std::vector<double>> bias;      // per layer, per output feature (normalized)
    std::vector<double> widths;                 // per layer pre-activation width
    std::vector<std::vector<double>> inputs;    // each: flat Shape3 order of the first layer's input
    std::vector<int> labels;
    double logit_scale = 0.3;
};

struct RelaxedGradients {
    double loss = 0;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;
};

RelaxedGradients relaxed_loss_and_gradients(const RelaxedProblem& problem);

}  // namespace neurotrail
