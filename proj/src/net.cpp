#include "rae/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "rae/dataset.hpp"

namespace rae {
namespace {

struct Shape {
    int c = 0, h = 0, w = 0;
    int size() const { return c * h * w; }
};

Shape output_shape(const Layer& layer, const Shape& in) {
    if (std::holds_alternative<ConvLayer>(layer)) {
        const auto& l = std::get<ConvLayer>(layer);
        return {l.out_ch, in.h, in.w};
    }
    if (std::holds_alternative<MaxPoolLayer>(layer)) return {in.c, in.h / 2, in.w / 2};
    if (std::holds_alternative<DenseLayer>(layer)) {
        const auto& l = std::get<DenseLayer>(layer);
        return {l.out, 1, 1};
    }
    return in;  // relu
}

std::vector<Shape> layer_shapes(const Model& m) {
    std::vector<Shape> shapes;
    shapes.push_back({m.input_ch, m.input_h, m.input_w});
    for (const Layer& l : m.layers) shapes.push_back(output_shape(l, shapes.back()));
    return shapes;
}

// Box-Muller normal from uniform draws; hand-rolled so that initialization
// is reproducible independent of the standard library's distributions.
class NormalGen {
public:
    explicit NormalGen(unsigned seed) : rng_(seed) {}
    double next(double stddev) {
        double u1 = (static_cast<double>(rng_()) + 1.0) / (static_cast<double>(rng_.max()) + 2.0);
        double u2 = (static_cast<double>(rng_()) + 1.0) / (static_cast<double>(rng_.max()) + 2.0);
        return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

private:
    std::mt19937 rng_;
};

void conv_forward(const ConvLayer& l, const double* in, const Shape& is, double* out,
                  Exec policy) {
    const int H = is.h, W = is.w;
    auto run = [&](int oc) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double acc = static_cast<double>(l.b[static_cast<std::size_t>(oc)]);
                for (int ic = 0; ic < l.in_ch; ++ic) {
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= W) continue;
                            acc += static_cast<double>(
                                       l.w[((static_cast<std::size_t>(oc) * l.in_ch + ic) * 3 +
                                            ky) * 3 + kx]) *
                                   in[(static_cast<std::size_t>(ic) * H + iy) * W + ix];
                        }
                    }
                }
                out[(static_cast<std::size_t>(oc) * H + y) * W + x] = acc;
            }
        }
    };
    if (policy == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < l.out_ch; ++oc) run(oc);
    } else {
        for (int oc = 0; oc < l.out_ch; ++oc) run(oc);
    }
}

// dIn gathers over output positions; dW/dB accumulate per output channel.
// Each parallel iteration owns disjoint slices, so results are bit-identical
// to the serial path.
void conv_backward(const ConvLayer& l, const double* in, const Shape& is, const double* dout,
                   double* din, double* dw, double* db, Exec policy) {
    const int H = is.h, W = is.w;
    auto grad_in = [&](int ic) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int oc = 0; oc < l.out_ch; ++oc) {
                    for (int ky = 0; ky < 3; ++ky) {
                        const int oy = y - ky + 1;
                        if (oy < 0 || oy >= H) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ox = x - kx + 1;
                            if (ox < 0 || ox >= W) continue;
                            acc += static_cast<double>(
                                       l.w[((static_cast<std::size_t>(oc) * l.in_ch + ic) * 3 +
                                            ky) * 3 + kx]) *
                                   dout[(static_cast<std::size_t>(oc) * H + oy) * W + ox];
                        }
                    }
                }
                din[(static_cast<std::size_t>(ic) * H + y) * W + x] = acc;
            }
        }
    };
    auto grad_params = [&](int oc) {
        double bacc = 0.0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                bacc += dout[(static_cast<std::size_t>(oc) * H + y) * W + x];
        db[oc] += bacc;
        for (int ic = 0; ic < l.in_ch; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    double acc = 0.0;
                    for (int y = 0; y < H; ++y) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        for (int x = 0; x < W; ++x) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= W) continue;
                            acc += in[(static_cast<std::size_t>(ic) * H + iy) * W + ix] *
                                   dout[(static_cast<std::size_t>(oc) * H + y) * W + x];
                        }
                    }
                    dw[((static_cast<std::size_t>(oc) * l.in_ch + ic) * 3 + ky) * 3 + kx] += acc;
                }
            }
        }
    };
    if (policy == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int ic = 0; ic < l.in_ch; ++ic) grad_in(ic);
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < l.out_ch; ++oc) grad_params(oc);
    } else {
        for (int ic = 0; ic < l.in_ch; ++ic) grad_in(ic);
        for (int oc = 0; oc < l.out_ch; ++oc) grad_params(oc);
    }
}

}  // namespace

Model Model::make_default(int ch, int h, int w, int classes, unsigned seed) {
    if (h % 4 != 0 || w % 4 != 0)
        throw Error(Errc::usage, "model: input height/width must be multiples of 4");
    Model m;
    m.input_ch = ch;
    m.input_h = h;
    m.input_w = w;
    m.classes = classes;
    NormalGen gen(seed);

    auto conv = [&](int in_ch, int out_ch) {
        ConvLayer l;
        l.in_ch = in_ch;
        l.out_ch = out_ch;
        l.w.resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
        l.b.assign(static_cast<std::size_t>(out_ch), 0.0f);
        const double std = std::sqrt(2.0 / (in_ch * 9.0));
        for (float& v : l.w) v = static_cast<float>(gen.next(std));
        return l;
    };
    auto dense = [&](int in, int out) {
        DenseLayer l;
        l.in = in;
        l.out = out;
        l.w.resize(static_cast<std::size_t>(out) * in);
        l.b.assign(static_cast<std::size_t>(out), 0.0f);
        const double std = std::sqrt(2.0 / in);
        for (float& v : l.w) v = static_cast<float>(gen.next(std));
        return l;
    };

    // A wide first conv on purpose: each channel pools through its own argmax
    // positions, so many diverse channels spread input gradients across whole
    // neighbourhoods instead of a few routed pixels.
    m.layers.push_back(conv(ch, 16));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(MaxPoolLayer{});
    m.layers.push_back(conv(16, 16));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(MaxPoolLayer{});
    m.layers.push_back(dense(16 * (h / 4) * (w / 4), 64));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(dense(64, classes));
    return m;
}

std::vector<double> net_forward(const Model& m, const std::vector<double>& x, ForwardCache* cache,
                                Exec policy) {
    const std::vector<Shape> shapes = layer_shapes(m);
    if (static_cast<int>(x.size()) != shapes[0].size())
        throw Error(Errc::usage, "net: input size mismatch");

    std::vector<std::vector<double>> acts;
    acts.reserve(m.layers.size() + 1);
    acts.push_back(x);
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const Shape& is = shapes[li];
        const Shape& os = shapes[li + 1];
        std::vector<double> out(static_cast<std::size_t>(os.size()), 0.0);
        const std::vector<double>& in = acts.back();
        if (const auto* conv = std::get_if<ConvLayer>(&m.layers[li])) {
            conv_forward(*conv, in.data(), is, out.data(), policy);
        } else if (std::holds_alternative<ReluLayer>(m.layers[li])) {
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
        } else if (std::holds_alternative<MaxPoolLayer>(m.layers[li])) {
            for (int c = 0; c < os.c; ++c)
                for (int y = 0; y < os.h; ++y)
                    for (int x2 = 0; x2 < os.w; ++x2) {
                        double best = -1e300;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                double v = in[(static_cast<std::size_t>(c) * is.h + 2 * y + dy) *
                                                  is.w + 2 * x2 + dx];
                                if (v > best) best = v;
                            }
                        out[(static_cast<std::size_t>(c) * os.h + y) * os.w + x2] = best;
                    }
        } else {
            const auto& l = std::get<DenseLayer>(m.layers[li]);
            auto run = [&](int o) {
                double acc = static_cast<double>(l.b[static_cast<std::size_t>(o)]);
                for (int i = 0; i < l.in; ++i)
                    acc += static_cast<double>(l.w[static_cast<std::size_t>(o) * l.in + i]) * in[static_cast<std::size_t>(i)];
                out[static_cast<std::size_t>(o)] = acc;
            };
            if (policy == Exec::parallel) {
#pragma omp parallel for schedule(static)
                for (int o = 0; o < l.out; ++o) run(o);
            } else {
                for (int o = 0; o < l.out; ++o) run(o);
            }
        }
        acts.push_back(std::move(out));
    }
    std::vector<double> logits = acts.back();
    if (cache) cache->acts = std::move(acts);
    return logits;
}

std::vector<double> net_backward(const Model& m, const ForwardCache& cache, const LossSpec& loss,
                                 Gradients* param_grads, Exec policy) {
    const std::vector<Shape> shapes = layer_shapes(m);
    const std::vector<double>& logits = cache.acts.back();

    std::vector<double> grad(logits.size(), 0.0);
    if (const auto* ce = std::get_if<LossCrossEntropy>(&loss)) {
        double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double v : logits) sum += std::exp(v - mx);
        const double k = static_cast<double>(logits.size());
        const double off = ce->smoothing / k;
        for (std::size_t i = 0; i < logits.size(); ++i)
            grad[i] = std::exp(logits[i] - mx) / sum - off;
        grad[static_cast<std::size_t>(ce->label)] -= 1.0 - ce->smoothing;
    } else if (const auto* lg = std::get_if<LossLogit>(&loss)) {
        grad[static_cast<std::size_t>(lg->index)] = 1.0;
    } else {
        const auto& ld = std::get<LossLogitDiff>(loss);
        grad[static_cast<std::size_t>(ld.index_a)] += 1.0;
        grad[static_cast<std::size_t>(ld.index_b)] -= 1.0;
    }

    if (param_grads) {
        param_grads->w.assign(m.layers.size(), {});
        param_grads->b.assign(m.layers.size(), {});
    }

    for (int li = static_cast<int>(m.layers.size()) - 1; li >= 0; --li) {
        const Shape& is = shapes[static_cast<std::size_t>(li)];
        const std::vector<double>& in = cache.acts[static_cast<std::size_t>(li)];
        const std::vector<double>& out = cache.acts[static_cast<std::size_t>(li) + 1];
        std::vector<double> din(static_cast<std::size_t>(is.size()), 0.0);

        if (const auto* conv = std::get_if<ConvLayer>(&m.layers[static_cast<std::size_t>(li)])) {
            std::vector<double> dw(conv->w.size(), 0.0), db(conv->b.size(), 0.0);
            conv_backward(*conv, in.data(), is, grad.data(), din.data(), dw.data(), db.data(),
                          policy);
            if (param_grads) {
                param_grads->w[static_cast<std::size_t>(li)] = std::move(dw);
                param_grads->b[static_cast<std::size_t>(li)] = std::move(db);
            }
        } else if (std::holds_alternative<ReluLayer>(m.layers[static_cast<std::size_t>(li)])) {
            for (std::size_t i = 0; i < in.size(); ++i) din[i] = in[i] > 0.0 ? grad[i] : 0.0;
        } else if (std::holds_alternative<MaxPoolLayer>(m.layers[static_cast<std::size_t>(li)])) {
            const Shape os = output_shape(m.layers[static_cast<std::size_t>(li)], is);
            for (int c = 0; c < os.c; ++c)
                for (int y = 0; y < os.h; ++y)
                    for (int x2 = 0; x2 < os.w; ++x2) {
                        // Route to the first maximum in scan order, matching
                        // the forward pass.
                        int by = 0, bx = 0;
                        double best = -1e300;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                double v = in[(static_cast<std::size_t>(c) * is.h + 2 * y + dy) *
                                                  is.w + 2 * x2 + dx];
                                if (v > best) {
                                    best = v;
                                    by = dy;
                                    bx = dx;
                                }
                            }
                        din[(static_cast<std::size_t>(c) * is.h + 2 * y + by) * is.w + 2 * x2 +
                            bx] += grad[(static_cast<std::size_t>(c) * os.h + y) * os.w + x2];
                    }
            (void)out;
        } else {
            const auto& l = std::get<DenseLayer>(m.layers[static_cast<std::size_t>(li)]);
            std::vector<double> dw, db;
            if (param_grads) {
                dw.assign(l.w.size(), 0.0);
                db.assign(l.b.size(), 0.0);
            }
            for (int o = 0; o < l.out; ++o) {
                const double g = grad[static_cast<std::size_t>(o)];
                if (param_grads) {
                    db[static_cast<std::size_t>(o)] += g;
                    for (int i = 0; i < l.in; ++i)
                        dw[static_cast<std::size_t>(o) * l.in + i] += g * in[static_cast<std::size_t>(i)];
                }
                for (int i = 0; i < l.in; ++i)
                    din[static_cast<std::size_t>(i)] +=
                        g * static_cast<double>(l.w[static_cast<std::size_t>(o) * l.in + i]);
            }
            if (param_grads) {
                param_grads->w[static_cast<std::size_t>(li)] = std::move(dw);
                param_grads->b[static_cast<std::size_t>(li)] = std::move(db);
            }
        }
        grad = std::move(din);
    }
    return grad;
}

double softmax_cross_entropy(const std::vector<double>& logits, int label) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return std::log(sum) - (logits[static_cast<std::size_t>(label)] - mx);
}

int argmax_label(const std::vector<double>& logits) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<double> image_to_input(const Image& img) {
    std::vector<double> x(img.sample_count());
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int xx = 0; xx < img.width; ++xx)
                x[(static_cast<std::size_t>(c) * img.height + y) * img.width + xx] =
                    img.at(xx, y, c) / 255.0;
    return x;
}

Image input_to_image(const std::vector<double>& x, int ch, int h, int w) {
    Image img(w, h, ch);
    for (int c = 0; c < ch; ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double v = x[(static_cast<std::size_t>(c) * h + y) * w + xx] * 255.0;
                long r = std::lround(v);
                img.at(xx, y, c) = static_cast<std::uint8_t>(std::clamp(r, 0l, 255l));
            }
    return img;
}

int predict_label(const Model& m, const Image& img, Exec policy) {
    return argmax_label(net_forward(m, image_to_input(img), nullptr, policy));
}

void train_sgd(Model& m, const Dataset& data, const TrainConfig& cfg,
               const std::function<void(int, double, double)>& log) {
    if (data.size() == 0) throw Error(Errc::usage, "train: empty dataset");
    std::mt19937 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    // The non-negativity constraint only concerns the layer that touches
    // pixels: the first conv. Later layers keep their full sign freedom.
    std::size_t nonneg_at = m.layers.size();
    if (cfg.nonneg_conv) {
        for (std::size_t li = 0; li < m.layers.size(); ++li) {
            if (auto* conv = std::get_if<ConvLayer>(&m.layers[li])) {
                // Fold the symmetric init into the constraint set; clamping
                // would silence half of every kernel from the first step on.
                for (float& w : conv->w) w = std::abs(w);
                nonneg_at = li;
                break;
            }
        }
    }

    std::size_t stem = m.layers.size();
    if (cfg.blur_stem) {
        for (std::size_t li = 0; li < m.layers.size(); ++li) {
            if (auto* conv = std::get_if<ConvLayer>(&m.layers[li])) {
                static const float g[9] = {1, 2, 1, 2, 4, 2, 1, 2, 1};
                for (std::size_t i = 0; i < conv->w.size(); ++i)
                    conv->w[i] = g[i % 9] / (16.0f * static_cast<float>(conv->in_ch));
                std::fill(conv->b.begin(), conv->b.end(), 0.0f);
                stem = li;
                break;
            }
        }
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Gradients sum;
            sum.w.assign(m.layers.size(), {});
            sum.b.assign(m.layers.size(), {});
            for (std::size_t k = start; k < end; ++k) {
                const Image& img = data.images[order[k]];
                const int label = data.labels[order[k]];
                ForwardCache cache;
                std::vector<double> logits = net_forward(m, image_to_input(img), &cache);
                loss_sum += softmax_cross_entropy(logits, label);
                if (argmax_label(logits) == label) ++correct;
                Gradients g;
                net_backward(m, cache, LossCrossEntropy{label, cfg.label_smoothing}, &g);
                for (std::size_t li = 0; li < m.layers.size(); ++li) {
                    if (g.w[li].empty()) continue;
                    if (sum.w[li].empty()) {
                        sum.w[li] = std::move(g.w[li]);
                        sum.b[li] = std::move(g.b[li]);
                    } else {
                        for (std::size_t i = 0; i < g.w[li].size(); ++i) sum.w[li][i] += g.w[li][i];
                        for (std::size_t i = 0; i < g.b[li].size(); ++i) sum.b[li][i] += g.b[li][i];
                    }
                }
            }
            const double scale = cfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t li = 0; li < m.layers.size(); ++li) {
                if (sum.w[li].empty() || li == stem) continue;
                auto update = [&](std::vector<float>& p, const std::vector<double>& grads) {
                    for (std::size_t i = 0; i < p.size(); ++i)
                        p[i] = static_cast<float>(static_cast<double>(p[i]) - scale * grads[i]);
                };
                if (auto* conv = std::get_if<ConvLayer>(&m.layers[li])) {
                    update(conv->w, sum.w[li]);
                    update(conv->b, sum.b[li]);
                    if (cfg.nonneg_conv)
                        for (float& w : conv->w) w = std::max(w, 0.0f);
                } else if (auto* dense = std::get_if<DenseLayer>(&m.layers[li])) {
                    update(dense->w, sum.w[li]);
                    update(dense->b, sum.b[li]);
                }
            }
        }
        if (log)
            log(epoch, loss_sum / static_cast<double>(data.size()),
                static_cast<double>(correct) / static_cast<double>(data.size()));
    }
}

double dataset_accuracy(const Model& m, const Dataset& data, Exec policy) {
    if (data.size() == 0) throw Error(Errc::usage, "accuracy: empty dataset");
    std::vector<int> ok(data.size(), 0);
    if (policy == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(data.size()); ++i)
            ok[static_cast<std::size_t>(i)] =
                predict_label(m, data.images[static_cast<std::size_t>(i)]) ==
                data.labels[static_cast<std::size_t>(i)];
    } else {
        for (std::size_t i = 0; i < data.size(); ++i)
            ok[i] = predict_label(m, data.images[i]) == data.labels[i];
    }
    std::size_t correct = 0;
    for (int v : ok) correct += static_cast<std::size_t>(v);
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw Error(Errc::io, path + ": truncated weight file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32s(std::ofstream& out, const std::vector<float>& v) {
    for (float f : v) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        write_u32(out, u);
    }
}

void read_f32s(std::ifstream& in, std::vector<float>& v, const std::string& path) {
    for (float& f : v) {
        std::uint32_t u = read_u32(in, path);
        std::memcpy(&f, &u, 4);
    }
}

}  // namespace

void save_model(const Model& m, const std::string& path) {
    nlohmann::ordered_json manifest;
    manifest["input"] = {m.input_ch, m.input_h, m.input_w};
    manifest["classes"] = m.classes;
    manifest["layers"] = nlohmann::ordered_json::array();
    for (const Layer& layer : m.layers) {
        nlohmann::ordered_json j;
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            j["type"] = "conv";
            j["in"] = conv->in_ch;
            j["out"] = conv->out_ch;
            j["k"] = conv->k;
        } else if (std::holds_alternative<ReluLayer>(layer)) {
            j["type"] = "relu";
        } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
            j["type"] = "maxpool";
        } else {
            const auto& dense = std::get<DenseLayer>(layer);
            j["type"] = "dense";
            j["in"] = dense.in;
            j["out"] = dense.out;
        }
        manifest["layers"].push_back(j);
    }
    const std::string manifest_str = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, path + ": cannot open for writing");
    out.write("RAEN", 4);
    write_u32(out, 1);  // version
    write_u32(out, static_cast<std::uint32_t>(manifest_str.size()));
    out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    for (const Layer& layer : m.layers) {
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            write_f32s(out, conv->w);
            write_f32s(out, conv->b);
        } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            write_f32s(out, dense->w);
            write_f32s(out, dense->b);
        }
    }
    out.flush();
    if (!out) throw Error(Errc::io, path + ": write failure");
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, path + ": cannot open for reading");
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "RAEN")
        throw Error(Errc::io, path + ": not a weight file (bad magic)");
    if (read_u32(in, path) != 1)
        throw Error(Errc::io, path + ": unsupported weight file version");
    const std::uint32_t mlen = read_u32(in, path);
    std::string manifest_str(mlen, '\0');
    if (!in.read(manifest_str.data(), mlen))
        throw Error(Errc::io, path + ": truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_str);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io, path + ": bad manifest: " + e.what());
    }

    Model m;
    try {
        m.input_ch = manifest.at("input").at(0).get<int>();
        m.input_h = manifest.at("input").at(1).get<int>();
        m.input_w = manifest.at("input").at(2).get<int>();
        m.classes = manifest.at("classes").get<int>();
        for (const auto& j : manifest.at("layers")) {
            const std::string type = j.at("type").get<std::string>();
            if (type == "conv") {
                ConvLayer l;
                l.in_ch = j.at("in").get<int>();
                l.out_ch = j.at("out").get<int>();
                l.k = j.at("k").get<int>();
                if (l.k != 3) throw Error(Errc::io, path + ": only 3x3 kernels are supported");
                l.w.resize(static_cast<std::size_t>(l.out_ch) * l.in_ch * 9);
                l.b.resize(static_cast<std::size_t>(l.out_ch));
                m.layers.emplace_back(std::move(l));
            } else if (type == "relu") {
                m.layers.emplace_back(ReluLayer{});
            } else if (type == "maxpool") {
                m.layers.emplace_back(MaxPoolLayer{});
            } else if (type == "dense") {
                DenseLayer l;
                l.in = j.at("in").get<int>();
                l.out = j.at("out").get<int>();
                l.w.resize(static_cast<std::size_t>(l.out) * l.in);
                l.b.resize(static_cast<std::size_t>(l.out));
                m.layers.emplace_back(std::move(l));
            } else {
                throw Error(Errc::io, path + ": unknown layer type '" + type + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io, path + ": bad manifest: " + e.what());
    }

    for (Layer& layer : m.layers) {
        if (auto* conv = std::get_if<ConvLayer>(&layer)) {
            read_f32s(in, conv->w, path);
            read_f32s(in, conv->b, path);
        } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
            read_f32s(in, dense->w, path);
            read_f32s(in, dense->b, path);
        }
    }
    char extra;
    if (in.read(&extra, 1))
        throw Error(Errc::io, path + ": trailing data after parameters");
    return m;
}

}  // namespace rae
