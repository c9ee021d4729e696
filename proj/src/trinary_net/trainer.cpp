#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "neurotrail/error.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/train.hpp"
#include "neurotrail/vision.hpp"

namespace neurotrail {

double ConfusionMatrix::accuracy() const {
    uint32_t hit = 0;
    for (int i = 0; i < kNumClasses; ++i) hit += counts[i][i];
    const uint32_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(hit) / n;
}

uint32_t ConfusionMatrix::total() const {
    uint32_t n = 0;
    for (const auto& row : counts)
        for (uint32_t v : row) n += v;
    return n;
}

namespace {

// Convolution stack evaluated on NHWC row-major matrices: each row is one
// spatial position of one sample, each column one feature.
template <typename S>
class Engine {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

    struct Layer {
        LayerSpec geo;
        Shape3 in;
        Shape3 out;
        S width = 1;
        Mat weights;  // [out_features][fan_in], effective values used by forward
        RowVec bias;  // normalized: theta = width * bias
        std::vector<Mat> cols;
        Mat pre;
        Mat act;
        Mat grad_w;
        RowVec grad_b;
    };

    Engine(const TrinaryNetworkSpec& spec, std::vector<S> widths, bool relaxed, S logit_scale)
        : relaxed_(relaxed), logit_scale_(logit_scale), classes_(static_cast<int>(spec.class_populations.size())) {
        for (size_t i = 0; i < spec.layers.size(); ++i) {
            Layer l;
            l.geo = spec.layers[i];
            l.in = spec.layer_input_shape(i);
            l.out = spec.layer_output_shape(i);
            l.width = widths[i];
            l.weights = Mat::Zero(l.geo.out_features, l.geo.fan_in());
            l.bias = RowVec::Zero(l.geo.out_features);
            l.cols.resize(l.geo.feature_groups);
            layers_.push_back(std::move(l));
        }
        const Shape3 out = spec.output_shape();
        class_of_.assign(out.size(), 0);
        for (int c = 0; c < classes_; ++c)
            for (uint32_t id : spec.class_populations[c]) class_of_[id] = c;
    }

    std::vector<Layer>& layers() { return layers_; }

    // x: (batch * positions) x channels. Returns batch x classes counts.
    Mat forward(const Mat& x, int batch) {
        batch_ = batch;
        const Mat* cur = &x;
        for (auto& l : layers_) {
            const int og = l.geo.out_per_group();
            const int rows = batch * l.out.width * l.out.height;
            l.pre.resize(rows, l.geo.out_features);
            for (int g = 0; g < l.geo.feature_groups; ++g) {
                im2col(l, *cur, g, l.cols[g]);
                l.pre.middleCols(g * og, og).noalias() =
                    l.cols[g] * l.weights.middleRows(g * og, og).transpose();
            }
            // pre currently holds the raw sums z; convert to (z - theta) / width.
            for (int o = 0; o < l.geo.out_features; ++o) {
                const S theta = l.width * l.bias(o);
                l.pre.col(o).array() -= theta;
            }
            l.act.resize(rows, l.geo.out_features);
            if (relaxed_) {
                l.pre /= l.width;
                l.act = l.pre.cwiseMax(S(-1)).cwiseMin(S(1));
            } else {
                // Spike decision on z - theta before scaling keeps it identical
                // to the integer comparison used at deployment.
                l.act = (l.pre.array() > S(0)).template cast<S>();
                l.pre /= l.width;
            }
            cur = &l.act;
        }
        return population_counts(layers_.back());
    }

    // Softmax cross-entropy over logit_scale * counts, averaged over the batch.
    // Fills grad_w / grad_b of every layer.
    S backward(const Mat& counts, const std::vector<int>& labels) {
        const int batch = batch_;
        Mat dcounts(batch, classes_);
        S loss = 0;
        for (int b = 0; b < batch; ++b) {
            RowVec logits = logit_scale_ * counts.row(b);
            const S mx = logits.maxCoeff();
            RowVec e = (logits.array() - mx).exp();
            const S z = e.sum();
            loss += std::log(z) - (logits(labels[b]) - mx);
            dcounts.row(b) = e / z;
            dcounts(b, labels[b]) -= 1;
        }
        dcounts *= logit_scale_ / batch;
        loss /= batch;

        Layer& last = layers_.back();
        const int positions = last.out.width * last.out.height;
        Mat dact(last.act.rows(), last.act.cols());
        for (int b = 0; b < batch; ++b)
            for (int p = 0; p < positions; ++p)
                for (int f = 0; f < last.geo.out_features; ++f)
                    dact(b * positions + p, f) = dcounts(b, class_of_[static_cast<size_t>(f) * positions + p]);

        for (size_t li = layers_.size(); li-- > 0;) {
            Layer& l = layers_[li];
            const int og = l.geo.out_per_group();
            Mat dz = (l.pre.array().abs() <= S(1)).select(dact, S(0));
            l.grad_b = -dz.colwise().sum();
            dz /= l.width;
            l.grad_w.resize(l.weights.rows(), l.weights.cols());
            Mat dx;
            if (li > 0) dx = Mat::Zero(batch * l.in.width * l.in.height, l.in.features);
            for (int g = 0; g < l.geo.feature_groups; ++g) {
                l.grad_w.middleRows(g * og, og).noalias() = dz.middleCols(g * og, og).transpose() * l.cols[g];
                if (li > 0) {
                    Mat dcol = dz.middleCols(g * og, og) * l.weights.middleRows(g * og, og);
                    col2im(l, dcol, g, dx);
                }
            }
            if (li > 0) dact = std::move(dx);
        }
        return loss;
    }

private:
    Mat population_counts(const Layer& last) const {
        const int positions = last.out.width * last.out.height;
        Mat counts = Mat::Zero(batch_, classes_);
        for (int b = 0; b < batch_; ++b)
            for (int p = 0; p < positions; ++p)
                for (int f = 0; f < last.geo.out_features; ++f)
                    counts(b, class_of_[static_cast<size_t>(f) * positions + p]) += last.act(b * positions + p, f);
        return counts;
    }

    template <typename Fn>
    void for_each_tap(const Layer& l, Fn&& fn) const {
        const auto& g = l.geo;
        const int cg = g.in_per_group();
        for (int b = 0; b < batch_; ++b)
            for (int oy = 0; oy < l.out.height; ++oy)
                for (int ox = 0; ox < l.out.width; ++ox) {
                    const int row = (b * l.out.height + oy) * l.out.width + ox;
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const int iy = oy * g.stride - g.padding + ky;
                        if (iy < 0 || iy >= l.in.height) continue;
                        for (int kx = 0; kx < g.kw; ++kx) {
                            const int ix = ox * g.stride - g.padding + kx;
                            if (ix < 0 || ix >= l.in.width) continue;
                            fn(row, (ky * g.kw + kx) * cg, (b * l.in.height + iy) * l.in.width + ix);
                        }
                    }
                }
    }

    void im2col(const Layer& l, const Mat& x, int group, Mat& cols) const {
        const int cg = l.geo.in_per_group();
        cols.setZero(batch_ * l.out.width * l.out.height, l.geo.fan_in());
        for_each_tap(l, [&](int row, int col, int src) {
            cols.row(row).segment(col, cg) = x.row(src).segment(group * cg, cg);
        });
    }

    void col2im(const Layer& l, const Mat& dcol, int group, Mat& dx) const {
        const int cg = l.geo.in_per_group();
        for_each_tap(l, [&](int row, int col, int src) {
            dx.row(src).segment(group * cg, cg) += dcol.row(row).segment(col, cg);
        });
    }

    bool relaxed_;
    S logit_scale_;
    int classes_;
    int batch_ = 0;
    std::vector<Layer> layers_;
    std::vector<int> class_of_;
};

std::vector<float> layer_widths(const TrinaryNetworkSpec& spec, const TrainConfig& cfg) {
    std::vector<float> w;
    for (const auto& l : spec.layers)
        w.push_back(l.kind == LayerKind::HostConv ? cfg.host_width
                                                  : cfg.core_width_factor * std::sqrt(static_cast<float>(l.fan_in())));
    return w;
}

int32_t deploy_threshold(float theta) {
    const double f = std::floor(static_cast<double>(theta));
    return static_cast<int32_t>(std::clamp(f, -2147483648.0, 2147483647.0));
}

struct Adam {
    std::vector<float> m, v;
    explicit Adam(size_t n) : m(n, 0.f), v(n, 0.f) {}
    template <typename P, typename G>
    void step(P& param, const G& grad, float lr, int t) {
        constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
        const float c1 = 1.f - std::pow(b1, static_cast<float>(t));
        const float c2 = 1.f - std::pow(b2, static_cast<float>(t));
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const float g = grad(i);
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            param(i) -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

using MatF = Engine<float>::Mat;

void fill_batch(const std::vector<LabeledImage>& set, const std::vector<size_t>& order, size_t begin,
                size_t end, MatF& x, std::vector<int>& labels) {
    const size_t n = end - begin;
    const int w = vision::kNetWidth, h = vision::kNetHeight;
    x.resize(static_cast<Eigen::Index>(n) * w * h, 3);
    labels.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const LabeledImage& s = set[order[begin + i]];
        labels[i] = s.label;
        const uint8_t* px = s.image.pixels.data();
        for (int p = 0; p < w * h; ++p)
            for (int c = 0; c < 3; ++c)
                x(static_cast<Eigen::Index>(i) * w * h + p, c) = static_cast<float>(px[p * 3 + c]) - 128.f;
    }
}

}  // namespace

ConfusionMatrix evaluate(const TrinaryNetworkSpec& spec, const std::vector<LabeledImage>& samples) {
    ReferenceNet net(spec);
    ConfusionMatrix cm;
    for (const auto& s : samples) {
        const auto plane = vision::host_conv_threshold(s.image, spec.layers.front());
        const auto h = net.histogram(plane.to_tensor());
        const auto pred = static_cast<int>(pilot::decide(h));
        cm.counts[s.label][pred] += 1;
    }
    return cm;
}

TrainResult train(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& test_set,
                  const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (train_set.empty()) throw DataError("training set is empty");
    std::array<size_t, kNumClasses> per_class{};
    for (const auto& s : train_set) {
        if (s.label < 0 || s.label >= kNumClasses)
            throw DataError("label " + std::to_string(s.label) + " is not a steering class");
        if (s.image.width != vision::kNetWidth || s.image.height != vision::kNetHeight)
            throw ShapeError("training images must be 44x36");
        ++per_class[s.label];
    }
    for (const auto& s : test_set)
        if (s.label < 0 || s.label >= kNumClasses) throw DataError("test label out of range");
    if (cfg.require_all_classes)
        for (int c = 0; c < kNumClasses; ++c)
            if (per_class[c] == 0)
                throw DataError("class " + std::string(command_name(static_cast<DriveCommand>(c))) +
                                " has no training samples");

    TrinaryNetworkSpec spec = make_default_architecture(cfg.arch);
    const auto widths = layer_widths(spec, cfg);
    Engine<float> engine(spec, widths, false, cfg.logit_scale);
    auto& layers = engine.layers();

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<float> init(-1.f, 1.f);
    ShadowWeights shadow;
    shadow.tau_frac = cfg.tau_frac;
    std::vector<Adam> adam_w, adam_b;
    for (auto& l : layers) {
        shadow.layers.emplace_back(l.weights.size());
        for (auto& v : shadow.layers.back()) v = init(rng);
        adam_w.emplace_back(l.weights.size());
        adam_b.emplace_back(l.bias.size());
    }
    auto sync_weights = [&] {
        for (size_t i = 0; i < layers.size(); ++i) {
            const auto t = trinarize(shadow.layers[i], shadow.tau_frac);
            for (size_t k = 0; k < t.size(); ++k) layers[i].weights.data()[k] = t[k];
        }
    };

    TrainResult result;
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const size_t batch = static_cast<size_t>(std::max(1, cfg.batch_size));
    const size_t per_epoch = (train_set.size() + batch - 1) / batch;
    const double total_iters = static_cast<double>(per_epoch) * std::max(1, cfg.epochs);
    MatF x;
    std::vector<int> labels;
    int t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        size_t correct = 0;
        for (size_t begin = 0; begin < train_set.size(); begin += batch) {
            const size_t end = std::min(train_set.size(), begin + batch);
            fill_batch(train_set, order, begin, end, x, labels);
            sync_weights();
            const MatF counts = engine.forward(x, static_cast<int>(end - begin));
            for (size_t b = 0; b < end - begin; ++b) {
                ClassHistogram h;
                for (int c = 0; c < kNumClasses; ++c) h.counts.push_back(static_cast<uint32_t>(counts(b, c)));
                correct += static_cast<int>(pilot::decide(h)) == labels[b];
            }
            const float loss = engine.backward(counts, labels);
            result.report.loss_history.push_back(loss);
            epoch_loss += loss * static_cast<double>(end - begin);

            ++t;
            const double progress = t / total_iters;
            const float lr = static_cast<float>(cfg.learning_rate * (0.05 + 0.95 * 0.5 * (1 + std::cos(std::numbers::pi * progress))));
            for (size_t i = 0; i < layers.size(); ++i) {
                Eigen::Map<Eigen::VectorXf> w(shadow.layers[i].data(), static_cast<Eigen::Index>(shadow.layers[i].size()));
                Eigen::Map<const Eigen::VectorXf> gw(layers[i].grad_w.data(), layers[i].grad_w.size());
                adam_w[i].step(w, gw, lr, t);
                w = w.cwiseMax(-1.f).cwiseMin(1.f);
                Eigen::Map<Eigen::VectorXf> b(layers[i].bias.data(), layers[i].bias.size());
                Eigen::Map<const Eigen::VectorXf> gb(layers[i].grad_b.data(), layers[i].grad_b.size());
                adam_b[i].step(b, gb, lr, t);
            }
        }
        if (cfg.on_epoch)
            cfg.on_epoch(epoch, epoch_loss / train_set.size(), static_cast<double>(correct) / train_set.size());
    }

    sync_weights();
    const auto deployed = trinarize(shadow);
    for (size_t i = 0; i < layers.size(); ++i) {
        spec.layers[i].weights = deployed[i];
        for (int o = 0; o < spec.layers[i].out_features; ++o)
            spec.layers[i].thresholds[o] = deploy_threshold(layers[i].width * layers[i].bias(o));
        result.normalized_bias.emplace_back(layers[i].bias.data(), layers[i].bias.data() + layers[i].bias.size());
    }
    spec.validate();
    result.report.iterations = t;
    result.report.train_confusion = evaluate(spec, train_set);
    result.report.test_confusion = evaluate(spec, test_set);
    result.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.spec = std::move(spec);
    result.shadow = std::move(shadow);
    return result;
}

RelaxedGradients relaxed_loss_and_gradients(const RelaxedProblem& p) {
    p.spec.validate();
    if (p.inputs.size() != p.labels.size() || p.inputs.empty())
        throw DataError("relaxed problem needs one label per input");
    Engine<double> engine(p.spec, p.widths, true, p.logit_scale);
    auto& layers = engine.layers();
    for (size_t i = 0; i < layers.size(); ++i) {
        for (size_t k = 0; k < p.weights[i].size(); ++k) layers[i].weights.data()[k] = p.weights[i][k];
        for (size_t k = 0; k < p.bias[i].size(); ++k) layers[i].bias(static_cast<Eigen::Index>(k)) = p.bias[i][k];
    }
    const Shape3 in = p.spec.input_shape;
    Engine<double>::Mat x(static_cast<Eigen::Index>(p.inputs.size()) * in.width * in.height, in.features);
    for (size_t b = 0; b < p.inputs.size(); ++b)
        for (int f = 0; f < in.features; ++f)
            for (int y = 0; y < in.height; ++y)
                for (int xx = 0; xx < in.width; ++xx)
                    x((static_cast<Eigen::Index>(b) * in.height + y) * in.width + xx, f) = p.inputs[b][in.index(xx, y, f)];
    const auto counts = engine.forward(x, static_cast<int>(p.inputs.size()));
    RelaxedGradients g;
    g.loss = engine.backward(counts, p.labels);
    for (auto& l : layers) {
        g.weights.emplace_back(l.grad_w.data(), l.grad_w.data() + l.grad_w.size());
        g.bias.emplace_back(l.grad_b.data(), l.grad_b.data() + l.grad_b.size());
    }
    return g;
}

}  // namespace neurotrail
