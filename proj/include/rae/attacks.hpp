#pragma once

#include <string>
#include <vector>

#include "rae/common.hpp"
#include "rae/image.hpp"
#include "rae/net.hpp"

namespace rae {

// Untargeted white-box attacks. All three operate on [0,1] inputs; the
// adversarial image is rounded back to 8 bits and success is always judged
// on that rounded image (the pre-rounding verdict is reported separately).

struct AttackConfig {
    std::string method = "ifgsm";  // ifgsm | deepfool | cw
    // ifgsm
    double epsilon = 8.0 / 255.0;  // L-inf budget in [0,1] scale
    int iterations = 10;
    double alpha = 1.0 / 255.0;  // step size; 0 selects 2.5 * epsilon / iterations, capped at epsilon
    // deepfool
    double overshoot = 0.02;
    int deepfool_max_iterations = 50;
    // cw
    double kappa = 0.0;
    double cw_c = 1.0;
    double cw_learning_rate = 0.005;
    int cw_iterations = 300;

    unsigned seed = 0;
};

// key=value file, one entry per line, '#' comments. Accepts plain decimals
// and fractions like "8/255" for the real-valued keys.
AttackConfig load_attack_config(const std::string& path);
void apply_config_entry(AttackConfig& cfg, const std::string& key, const std::string& value);

struct AttackOutcome {
    Image adversarial;           // rounded 8-bit result
    bool success = false;        // misclassified after rounding
    bool success_pre_round = false;
    int predicted_label = -1;    // label of the rounded adversarial image
    int iterations_used = 0;
    double margin = 0.0;         // best-other minus true logit, pre-rounding
    double l2 = 0.0;             // ||adv - orig||_2 in [0,1] scale, after rounding
    double linf = 0.0;           // max |adv - orig| in [0,1] scale, after rounding
};

AttackOutcome run_attack(const Model& m, const Image& img, int true_label,
                         const AttackConfig& cfg);

AttackOutcome ifgsm(const Model& m, const Image& img, int true_label, const AttackConfig& cfg);
AttackOutcome deepfool(const Model& m, const Image& img, int true_label, const AttackConfig& cfg);
AttackOutcome cw_l2(const Model& m, const Image& img, int true_label, const AttackConfig& cfg);

}  // namespace rae
