#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rae/common.hpp"
#include "rae/image.hpp"

namespace rae {

// Small CNN classifier with explicit forward and backward passes. Inputs are
// CHW doubles in [0, 1]; parameters are stored as f32 (so that a save/load
// round trip reproduces logits bit-exactly) while all arithmetic runs in
// double precision.

struct ConvLayer {
    int in_ch = 0, out_ch = 0, k = 3;  // 3x3, stride 1, zero-padded (same size)
    std::vector<float> w;              // [out][in][ky][kx]
    std::vector<float> b;              // [out]
};

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<float> w;  // [out][in]
    std::vector<float> b;  // [out]
};

struct ReluLayer {};
struct MaxPoolLayer {};  // 2x2, stride 2

using Layer = std::variant<ConvLayer, ReluLayer, MaxPoolLayer, DenseLayer>;

struct Model {
    int input_ch = 1, input_h = 32, input_w = 32;
    int classes = 10;
    std::vector<Layer> layers;

    // conv(ch->8) relu pool conv(8->16) relu pool dense(->64) relu dense(->classes)
    static Model make_default(int ch, int h, int w, int classes, unsigned seed);
};

// Activations of every layer boundary; acts[0] is the input, acts.back() the
// logits. Needed for the backward pass.
struct ForwardCache {
    std::vector<std::vector<double>> acts;
};

std::vector<double> net_forward(const Model& m, const std::vector<double>& x,
                                ForwardCache* cache = nullptr, Exec policy = Exec::serial);

// Loss heads for the backward pass.
struct LossCrossEntropy {
    int label;
    // Target spread uniformly over the other classes; 0 = plain one-hot.
    double smoothing = 0.0;
};
struct LossLogit { int index; };                 // d(logit[index]) / dx
struct LossLogitDiff { int index_a, index_b; };  // d(logit[a] - logit[b]) / dx
using LossSpec = std::variant<LossCrossEntropy, LossLogit, LossLogitDiff>;

struct Gradients {
    // Parallel to Model::layers; empty vectors for parameter-free layers.
    std::vector<std::vector<double>> w, b;
};

// Backward pass from the given loss head. Returns d(loss)/d(input); fills
// param_grads if non-null.
std::vector<double> net_backward(const Model& m, const ForwardCache& cache, const LossSpec& loss,
                                 Gradients* param_grads = nullptr, Exec policy = Exec::serial);

double softmax_cross_entropy(const std::vector<double>& logits, int label);
int argmax_label(const std::vector<double>& logits);

// Image <-> input-vector conversion ([0,1] CHW doubles; rounding back to
// 8-bit uses half-away-from-zero).
std::vector<double> image_to_input(const Image& img);
Image input_to_image(const std::vector<double>& x, int ch, int h, int w);

int predict_label(const Model& m, const Image& img, Exec policy = Exec::serial);

struct TrainConfig {
    int epochs = 6;
    int batch_size = 32;
    double learning_rate = 0.05;
    // Soft targets keep the logit margins small, which keeps the trained
    // model attackable at small L-inf budgets without hurting accuracy.
    double label_smoothing = 0.0;
    // Clamp convolution kernels to >= 0 after every update. Positive kernels
    // act as local averaging, so the class evidence (and with it the input
    // saliency) varies smoothly across neighbouring pixels instead of
    // alternating sign pixel-to-pixel; gradient attacks then produce
    // spatially coherent perturbations whose block means survive block-based
    // camouflage. Classification quality on the desk corpora is unaffected.
    bool nonneg_conv = true;
    // Pin the first convolution to a fixed 3x3 Gaussian and exclude it from
    // the updates. The stem then passes local means and rejects pixel-scale
    // oscillation, so no later layer can learn to key on single pixels; the
    // model's decisions (and its adversarial directions) live at the scale
    // local means can carry.
    bool blur_stem = true;
    unsigned seed = 1;
};

struct Dataset;  // see dataset.hpp

// Deterministic minibatch SGD (serial by design: reproducibility over speed).
// Reports per-epoch mean loss and training accuracy through the callback.
void train_sgd(Model& m, const Dataset& data, const TrainConfig& cfg,
               const std::function<void(int epoch, double loss, double acc)>& log = {});

double dataset_accuracy(const Model& m, const Dataset& data, Exec policy = Exec::parallel);

// Weight file: "RAEN" magic, u32 LE version, u32 LE manifest length, JSON
// manifest (shapes and layer list), then all parameters as f32 LE.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace rae
