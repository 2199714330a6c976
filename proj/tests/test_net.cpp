#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"

#include "helpers.hpp"
#include "rae/dataset.hpp"
#include "rae/net.hpp"

using namespace rae;

namespace {

// Small 8x8 model so the finite-difference sweep stays fast.
Model tiny_model(unsigned seed) {
    Model m;
    m.input_ch = 1;
    m.input_h = 8;
    m.input_w = 8;
    m.classes = 4;
    std::mt19937 rng(seed);
    auto frand = [&] {
        return (static_cast<double>(rng()) / static_cast<double>(rng.max()) - 0.5) * 0.8;
    };
    ConvLayer conv;
    conv.in_ch = 1;
    conv.out_ch = 3;
    conv.w.resize(27);
    conv.b.resize(3);
    for (float& v : conv.w) v = static_cast<float>(frand());
    for (float& v : conv.b) v = static_cast<float>(frand());
    DenseLayer dense;
    dense.in = 3 * 4 * 4;
    dense.out = 4;
    dense.w.resize(static_cast<std::size_t>(dense.in) * 4);
    dense.b.resize(4);
    for (float& v : dense.w) v = static_cast<float>(frand());
    for (float& v : dense.b) v = static_cast<float>(frand());
    m.layers = {conv, ReluLayer{}, MaxPoolLayer{}, dense};
    return m;
}

std::vector<double> random_input(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = static_cast<double>(rng()) / static_cast<double>(rng.max());
    return x;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max(1e-8, std::fabs(a) + std::fabs(b));
}

}  // namespace

TEST_CASE("input gradient matches finite differences") {
    const Model m = tiny_model(3);
    std::vector<double> x = random_input(64, 4);
    const int label = 2;
    const double h = 1e-4;

    ForwardCache cache;
    net_forward(m, x, &cache);
    const std::vector<double> g = net_backward(m, cache, LossCrossEntropy{label});

    for (std::size_t i = 0; i < x.size(); i += 3) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = softmax_cross_entropy(net_forward(m, x), label);
        x[i] = keep - h;
        const double dn = softmax_cross_entropy(net_forward(m, x), label);
        x[i] = keep;
        const double numeric = (up - dn) / (2.0 * h);
        if (std::fabs(numeric) < 1e-10 && std::fabs(g[i]) < 1e-10) continue;
        CHECK(rel_err(numeric, g[i]) < 1e-3);
    }
}

TEST_CASE("parameter gradients match finite differences") {
    Model m = tiny_model(7);
    const std::vector<double> x = random_input(64, 8);
    const int label = 1;
    const double h = 1e-4;

    ForwardCache cache;
    net_forward(m, x, &cache);
    Gradients grads;
    net_backward(m, cache, LossCrossEntropy{label}, &grads);

    auto check_param = [&](std::vector<float>& p, const std::vector<double>& g,
                           std::size_t stride) {
        for (std::size_t i = 0; i < p.size(); i += stride) {
            const float keep = p[i];
            p[i] = static_cast<float>(keep + h);
            const double up = softmax_cross_entropy(net_forward(m, x), label);
            p[i] = static_cast<float>(keep - h);
            const double dn = softmax_cross_entropy(net_forward(m, x), label);
            p[i] = keep;
            const double numeric = (up - dn) / (2.0 * h);
            if (std::fabs(numeric) < 1e-8 && std::fabs(g[i]) < 1e-8) continue;
            CHECK(rel_err(numeric, g[i]) < 1e-3);
        }
    };
    check_param(std::get<ConvLayer>(m.layers[0]).w, grads.w[0], 5);
    check_param(std::get<ConvLayer>(m.layers[0]).b, grads.b[0], 1);
    check_param(std::get<DenseLayer>(m.layers[3]).w, grads.w[3], 37);
    check_param(std::get<DenseLayer>(m.layers[3]).b, grads.b[3], 1);
}

TEST_CASE("logit and logit-difference heads") {
    const Model m = tiny_model(9);
    std::vector<double> x = random_input(64, 10);
    const double h = 1e-4;

    ForwardCache cache;
    net_forward(m, x, &cache);
    const std::vector<double> g2 = net_backward(m, cache, LossLogit{2});
    const std::vector<double> gd = net_backward(m, cache, LossLogitDiff{2, 0});

    for (std::size_t i = 0; i < x.size(); i += 7) {
        const double keep = x[i];
        x[i] = keep + h;
        const std::vector<double> up = net_forward(m, x);
        x[i] = keep - h;
        const std::vector<double> dn = net_forward(m, x);
        x[i] = keep;
        const double n2 = (up[2] - dn[2]) / (2.0 * h);
        const double nd = ((up[2] - up[0]) - (dn[2] - dn[0])) / (2.0 * h);
        if (std::fabs(n2) > 1e-10 || std::fabs(g2[i]) > 1e-10)
            CHECK(rel_err(n2, g2[i]) < 1e-3);
        if (std::fabs(nd) > 1e-10 || std::fabs(gd[i]) > 1e-10)
            CHECK(rel_err(nd, gd[i]) < 1e-3);
    }
}

TEST_CASE("forward pass is policy-independent") {
    const Model m = Model::make_default(1, 32, 32, 10, 5);
    const std::vector<double> x = random_input(1024, 6);
    CHECK(net_forward(m, x, nullptr, Exec::serial) == net_forward(m, x, nullptr, Exec::parallel));

    ForwardCache cs, cp;
    net_forward(m, x, &cs, Exec::serial);
    net_forward(m, x, &cp, Exec::parallel);
    CHECK(net_backward(m, cs, LossCrossEntropy{3}, nullptr, Exec::serial) ==
          net_backward(m, cp, LossCrossEntropy{3}, nullptr, Exec::parallel));
}

TEST_CASE("image/input conversion round trips") {
    const Image img = testutil::synthetic_image(16, 12, 3, 31);
    const std::vector<double> x = image_to_input(img);
    for (double v : x) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(input_to_image(x, 3, 12, 16) == img);
}

TEST_CASE("weight files reload to bit-identical logits") {
    const Model m = Model::make_default(1, 16, 16, 10, 42);
    const std::string path = testutil::tmp_path("model.rwt");
    save_model(m, path);
    const Model back = load_model(path);
    const std::vector<double> x = random_input(256, 1);
    CHECK(net_forward(m, x) == net_forward(back, x));
    std::remove(path.c_str());
}

TEST_CASE("corrupt weight files are rejected") {
    const std::string path = testutil::tmp_path("bad.rwt");
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("not a weight file", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS((void)load_model(path), Error);
    std::remove(path.c_str());
    CHECK_THROWS_AS((void)load_model("does_not_exist.rwt"), Error);
}

TEST_CASE("seed changes initialization, same seed repeats it") {
    const Model a = Model::make_default(1, 16, 16, 10, 1);
    const Model b = Model::make_default(1, 16, 16, 10, 1);
    const Model c = Model::make_default(1, 16, 16, 10, 2);
    CHECK(std::get<ConvLayer>(a.layers[0]).w == std::get<ConvLayer>(b.layers[0]).w);
    CHECK(std::get<ConvLayer>(a.layers[0]).w != std::get<ConvLayer>(c.layers[0]).w);
}

TEST_CASE("a short training run learns the synthetic digits") {
    const Dataset train = make_synthetic_digits(25, 11, 16);
    const Dataset test = make_synthetic_digits(10, 12, 16);
    Model m = Model::make_default(1, 16, 16, 10, 3);
    const double before = dataset_accuracy(m, test);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.08;
    train_sgd(m, train, cfg);
    const double after = dataset_accuracy(m, test);
    CHECK(after > before + 0.2);
    CHECK(after > 0.5);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const Dataset train = make_synthetic_digits(10, 13, 16);
    TrainConfig cfg;
    cfg.epochs = 1;
    Model a = Model::make_default(1, 16, 16, 10, 4);
    Model b = Model::make_default(1, 16, 16, 10, 4);
    train_sgd(a, train, cfg);
    train_sgd(b, train, cfg);
    const std::vector<double> x = random_input(256, 2);
    CHECK(net_forward(a, x) == net_forward(b, x));
}
