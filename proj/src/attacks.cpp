#include "rae/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rae {
namespace {

double parse_real(const std::string& value, const std::string& origin) {
    const std::size_t slash = value.find('/');
    try {
        if (slash != std::string::npos) {
            const double num = std::stod(value.substr(0, slash));
            const double den = std::stod(value.substr(slash + 1));
            if (den == 0.0) throw Error(Errc::usage, origin + ": division by zero");
            return num / den;
        }
        return std::stod(value);
    } catch (const std::exception&) {
        throw Error(Errc::usage, origin + ": cannot parse number '" + value + "'");
    }
}

int parse_int(const std::string& value, const std::string& origin) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::usage, origin + ": cannot parse integer '" + value + "'");
    }
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

struct WorkState {
    std::vector<double> x0;
    int ch, h, w;
};

Image round_to_image(const std::vector<double>& x, const WorkState& st) {
    return input_to_image(x, st.ch, st.h, st.w);
}

void finish(AttackOutcome& out, const Model& m, const WorkState& st, int true_label) {
    const std::vector<double> xr = image_to_input(out.adversarial);
    out.predicted_label = argmax_label(net_forward(m, xr));
    out.success = out.predicted_label != true_label;
    double l2 = 0.0, linf = 0.0;
    for (std::size_t i = 0; i < xr.size(); ++i) {
        const double d = xr[i] - st.x0[i];
        l2 += d * d;
        linf = std::max(linf, std::fabs(d));
    }
    out.l2 = std::sqrt(l2);
    out.linf = linf;
}

}  // namespace

void apply_config_entry(AttackConfig& cfg, const std::string& key, const std::string& value) {
    const std::string origin = "attack config, key '" + key + "'";
    if (key == "method") {
        if (value != "ifgsm" && value != "deepfool" && value != "cw")
            throw Error(Errc::usage, origin + ": unknown method '" + value + "'");
        cfg.method = value;
    } else if (key == "epsilon") {
        cfg.epsilon = parse_real(value, origin);
        if (cfg.epsilon <= 0.0 || cfg.epsilon > 1.0)
            throw Error(Errc::usage, origin + ": epsilon must be in (0, 1]");
    } else if (key == "iterations") {
        cfg.iterations = parse_int(value, origin);
    } else if (key == "alpha") {
        cfg.alpha = parse_real(value, origin);
    } else if (key == "overshoot") {
        cfg.overshoot = parse_real(value, origin);
    } else if (key == "deepfool_max_iterations") {
        cfg.deepfool_max_iterations = parse_int(value, origin);
    } else if (key == "kappa") {
        cfg.kappa = parse_real(value, origin);
    } else if (key == "c") {
        cfg.cw_c = parse_real(value, origin);
    } else if (key == "learning_rate") {
        cfg.cw_learning_rate = parse_real(value, origin);
    } else if (key == "cw_iterations") {
        cfg.cw_iterations = parse_int(value, origin);
    } else if (key == "seed") {
        cfg.seed = static_cast<unsigned>(parse_int(value, origin));
    } else {
        throw Error(Errc::usage, origin + ": unknown key");
    }
}

AttackConfig load_attack_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, path + ": cannot open for reading");
    AttackConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string entry = trim(line);
        if (entry.empty()) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::usage,
                        path + ":" + std::to_string(lineno) + ": expected key=value");
        apply_config_entry(cfg, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
    }
    return cfg;
}

AttackOutcome run_attack(const Model& m, const Image& img, int true_label,
                         const AttackConfig& cfg) {
    if (img.channels != m.input_ch || img.height != m.input_h || img.width != m.input_w)
        throw Error(Errc::usage, "attack: image shape does not match the model input");
    if (true_label < 0 || true_label >= m.classes)
        throw Error(Errc::usage, "attack: label out of range");
    if (cfg.method == "ifgsm") return ifgsm(m, img, true_label, cfg);
    if (cfg.method == "deepfool") return deepfool(m, img, true_label, cfg);
    if (cfg.method == "cw") return cw_l2(m, img, true_label, cfg);
    throw Error(Errc::usage, "attack: unknown method '" + cfg.method + "'");
}

AttackOutcome ifgsm(const Model& m, const Image& img, int true_label, const AttackConfig& cfg) {
    WorkState st{image_to_input(img), img.channels, img.height, img.width};
    const double eps = cfg.epsilon;
    double alpha = cfg.alpha > 0.0 ? cfg.alpha : 2.5 * eps / cfg.iterations;
    alpha = std::min(alpha, eps);
    // Integer-domain budget: |adv - orig| <= floor(255 * eps) per sample.
    const int eps_int = static_cast<int>(std::floor(255.0 * eps + 1e-9));

    AttackOutcome out;
    std::vector<double> x = st.x0;
    // The full iteration budget is always spent; stopping at the first
    // misclassification would leave the example right at the boundary, where
    // rounding (or any later processing) pushes it back.
    for (int it = 0; it < cfg.iterations; ++it) {
        ForwardCache cache;
        net_forward(m, x, &cache);
        const std::vector<double> g = net_backward(m, cache, LossCrossEntropy{true_label});
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double step = g[i] > 0.0 ? alpha : (g[i] < 0.0 ? -alpha : 0.0);
            double v = x[i] + step;
            v = std::clamp(v, st.x0[i] - eps, st.x0[i] + eps);
            x[i] = std::clamp(v, 0.0, 1.0);
        }
        out.iterations_used = it + 1;
    }
    Image adv = round_to_image(x, st);
    for (std::size_t i = 0; i < adv.pixels.size(); ++i) {
        const int base = img.pixels[i];
        const int lo = std::max(0, base - eps_int), hi = std::min(255, base + eps_int);
        adv.pixels[i] =
            static_cast<std::uint8_t>(std::clamp(static_cast<int>(adv.pixels[i]), lo, hi));
    }
    out.adversarial = std::move(adv);
    finish(out, m, st, true_label);
    out.success_pre_round = argmax_label(net_forward(m, x)) != true_label;
    return out;
}

AttackOutcome deepfool(const Model& m, const Image& img, int true_label,
                       const AttackConfig& cfg) {
    WorkState st{image_to_input(img), img.channels, img.height, img.width};
    AttackOutcome out;

    const std::vector<double> logits0 = net_forward(m, st.x0);
    const int l0 = argmax_label(logits0);
    if (l0 != true_label) {
        // Already misclassified: zero perturbation.
        out.adversarial = img;
        out.success_pre_round = true;
        finish(out, m, st, true_label);
        return out;
    }

    const std::size_t n = st.x0.size();
    std::vector<double> r_tot(n, 0.0);
    std::vector<double> x = st.x0;

    for (int it = 0; it < cfg.deepfool_max_iterations; ++it) {
        ForwardCache cache;
        const std::vector<double> logits = net_forward(m, x, &cache);

        // Nearest linearized decision boundary over all other classes.
        double best_ratio = 0.0;
        std::vector<double> best_w;
        double best_f = 0.0;
        bool found = false;
        for (int k = 0; k < m.classes; ++k) {
            if (k == l0) continue;
            const std::vector<double> w =
                net_backward(m, cache, LossLogitDiff{k, l0});
            double norm2 = 0.0;
            for (double v : w) norm2 += v * v;
            if (norm2 < 1e-20) continue;
            const double f = logits[static_cast<std::size_t>(k)] -
                             logits[static_cast<std::size_t>(l0)];
            const double ratio = std::fabs(f) / std::sqrt(norm2);
            if (!found || ratio < best_ratio) {
                found = true;
                best_ratio = ratio;
                best_w = w;
                best_f = f;
            }
        }
        if (!found) break;  // degenerate: all boundary gradients vanish

        double norm2 = 0.0;
        for (double v : best_w) norm2 += v * v;
        const double scale = (std::fabs(best_f) + 1e-4) / norm2;
        for (std::size_t i = 0; i < n; ++i) r_tot[i] += scale * best_w[i];

        for (std::size_t i = 0; i < n; ++i)
            x[i] = std::clamp(st.x0[i] + (1.0 + cfg.overshoot) * r_tot[i], 0.0, 1.0);
        out.iterations_used = it + 1;
        if (argmax_label(net_forward(m, x)) != l0) {
            out.success_pre_round = true;
            break;
        }
    }

    // The minimal perturbation often rounds away at 8 bits. Scale it up
    // geometrically until the rounded image also crosses the boundary.
    out.adversarial = round_to_image(x, st);
    if (out.success_pre_round) {
        double boost = 1.0;
        for (int b = 0; b < 12 && predict_label(m, out.adversarial) == l0; ++b) {
            boost *= 1.25;
            for (std::size_t i = 0; i < n; ++i)
                x[i] = std::clamp(st.x0[i] + (1.0 + cfg.overshoot) * boost * r_tot[i], 0.0, 1.0);
            out.adversarial = round_to_image(x, st);
        }
    }
    finish(out, m, st, true_label);
    return out;
}

AttackOutcome cw_l2(const Model& m, const Image& img, int true_label, const AttackConfig& cfg) {
    WorkState st{image_to_input(img), img.channels, img.height, img.width};
    const std::size_t n = st.x0.size();

    // tanh reparameterization keeps iterates inside (0, 1).
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::clamp(2.0 * st.x0[i] - 1.0, -1.0 + 1e-6, 1.0 - 1e-6);
        w[i] = std::atanh(t);
    }

    AttackOutcome out;
    std::vector<double> best_x;
    double best_l2 = 0.0;
    std::vector<double> x(n), th(n);

    for (int it = 0; it < cfg.cw_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            th[i] = std::tanh(w[i]);
            x[i] = 0.5 * (th[i] + 1.0);
        }
        ForwardCache cache;
        const std::vector<double> logits = net_forward(m, x, &cache);

        int other = -1;
        for (int k = 0; k < m.classes; ++k) {
            if (k == true_label) continue;
            if (other < 0 || logits[static_cast<std::size_t>(k)] >
                                 logits[static_cast<std::size_t>(other)])
                other = k;
        }
        const double fval = logits[static_cast<std::size_t>(true_label)] -
                            logits[static_cast<std::size_t>(other)];
        out.margin = -fval;
        out.iterations_used = it + 1;

        if (fval <= -cfg.kappa && argmax_label(logits) != true_label) {
            double l2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = x[i] - st.x0[i];
                l2 += d * d;
            }
            if (best_x.empty() || l2 < best_l2) {
                best_x = x;
                best_l2 = l2;
            }
        }

        std::vector<double> dx(n, 0.0);
        if (fval > -cfg.kappa) {
            // d(logit[true] - logit[other]) / dx, weighted by c.
            dx = net_backward(m, cache, LossLogitDiff{true_label, other});
            for (double& v : dx) v *= cfg.cw_c;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double g = dx[i] + 2.0 * (x[i] - st.x0[i]);
            w[i] -= cfg.cw_learning_rate * g * 0.5 * (1.0 - th[i] * th[i]);
        }
    }

    out.success_pre_round = !best_x.empty();
    out.adversarial = round_to_image(best_x.empty() ? x : best_x, st);
    finish(out, m, st, true_label);
    return out;
}

}  // namespace rae
