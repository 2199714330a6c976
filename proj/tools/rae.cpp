#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "rae/attacks.hpp"
#include "rae/dataset.hpp"
#include "rae/image.hpp"
#include "rae/net.hpp"
#include "rae/pipeline.hpp"
#include "rae/rdh.hpp"
#include "rae/rit.hpp"

namespace {

using rae::Errc;
using rae::Error;
using rae::Image;

// Center crop to the largest size divisible by `block`, enabled per command
// with --center-crop; without it, non-divisible inputs are a usage error.
Image center_crop(const Image& img, int block) {
    const int w = (img.width / block) * block;
    const int h = (img.height / block) * block;
    if (w == 0 || h == 0)
        throw Error(Errc::usage, "image smaller than one block, cannot crop");
    if (w == img.width && h == img.height) return img;
    const int x0 = (img.width - w) / 2;
    const int y0 = (img.height - h) / 2;
    Image out(w, h, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    return out;
}

// Shared attack options; CLI flags override values from --config.
struct AttackFlags {
    std::string config_path;
    std::string method;
    std::string epsilon;
    double alpha = -1.0;
    int iterations = -1;
    double overshoot = -1.0;
    double kappa = -1.0;
    double c = -1.0;
    double learning_rate = -1.0;
    int cw_iterations = -1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "attack config file (key=value lines)");
        cmd->add_option("--method", method, "ifgsm | deepfool | cw");
        cmd->add_option("--epsilon", epsilon, "L-inf budget, e.g. 8/255 or 0.03");
        cmd->add_option("--alpha", alpha, "ifgsm step size (default 2.5*eps/iters)");
        cmd->add_option("--iterations", iterations, "ifgsm iteration count");
        cmd->add_option("--overshoot", overshoot, "deepfool overshoot");
        cmd->add_option("--kappa", kappa, "cw confidence margin");
        cmd->add_option("--c", c, "cw distortion/loss trade-off");
        cmd->add_option("--learning-rate", learning_rate, "cw learning rate");
        cmd->add_option("--cw-iterations", cw_iterations, "cw iteration count");
    }

    rae::AttackConfig resolve() const {
        rae::AttackConfig cfg;
        if (!config_path.empty()) cfg = rae::load_attack_config(config_path);
        if (!method.empty()) rae::apply_config_entry(cfg, "method", method);
        if (!epsilon.empty()) rae::apply_config_entry(cfg, "epsilon", epsilon);
        if (alpha >= 0.0) cfg.alpha = alpha;
        if (iterations >= 0) cfg.iterations = iterations;
        if (overshoot >= 0.0) cfg.overshoot = overshoot;
        if (kappa >= 0.0) cfg.kappa = kappa;
        if (c >= 0.0) cfg.cw_c = c;
        if (learning_rate >= 0.0) cfg.cw_learning_rate = learning_rate;
        if (cw_iterations >= 0) cfg.cw_iterations = cw_iterations;
        return cfg;
    }
};

void print_attack_outcome(const rae::AttackOutcome& a, int label) {
    std::printf("true label:        %d\n", label);
    std::printf("adversarial label: %d\n", a.predicted_label);
    std::printf("success:           %s (pre-rounding: %s)\n", a.success ? "yes" : "no",
                a.success_pre_round ? "yes" : "no");
    std::printf("iterations:        %d\n", a.iterations_used);
    std::printf("l2 / linf ([0,1]): %.6f / %.6f\n", a.l2, a.linf);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reversible adversarial examples: attacks, reversible image "
                 "transformation, reversible data hiding"};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker threads (results are independent of this)")
        ->check(CLI::PositiveNumber);

    // make-dataset
    auto* mkds = app.add_subcommand("make-dataset", "generate the synthetic digit dataset");
    std::string ds_out;
    int ds_train = 400, ds_test = 100, ds_size = 32;
    unsigned ds_seed = 1;
    mkds->add_option("--out", ds_out, "output directory")->required();
    mkds->add_option("--train", ds_train, "training images per class");
    mkds->add_option("--test", ds_test, "test images per class");
    mkds->add_option("--size", ds_size, "image side length (multiple of 4)");
    mkds->add_option("--seed", ds_seed, "generator seed");

    // train
    auto* train = app.add_subcommand("train", "train the classifier");
    std::string tr_data, tr_out;
    rae::TrainConfig tr_cfg;
    train->add_option("--data", tr_data, "dataset root with train/ and test/ splits")->required();
    train->add_option("--out", tr_out, "output weight file")->required();
    train->add_option("--epochs", tr_cfg.epochs, "training epochs");
    train->add_option("--batch", tr_cfg.batch_size, "minibatch size");
    train->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    train->add_option("--smoothing", tr_cfg.label_smoothing, "label smoothing factor");
    train->add_option("--nonneg-conv", tr_cfg.nonneg_conv,
                      "clamp conv kernels non-negative (0/1)");
    train->add_option("--blur-stem", tr_cfg.blur_stem,
                      "pin the first conv to a fixed 3x3 Gaussian (0/1)");
    train->add_option("--seed", tr_cfg.seed, "init/shuffle seed");

    // attack
    auto* attack = app.add_subcommand("attack", "generate an adversarial example");
    std::string at_model, at_in, at_out;
    int at_label = -1;
    AttackFlags at_flags;
    attack->add_option("--model", at_model, "weight file")->required();
    attack->add_option("--in", at_in, "input image")->required();
    attack->add_option("--out", at_out, "output adversarial image")->required();
    attack->add_option("--label", at_label, "true label (default: model prediction)");
    at_flags.add_to(attack);

    // transform
    auto* transform = app.add_subcommand("transform", "disguise one image as another");
    std::string tf_orig, tf_target, tf_out;
    rae::RitConfig tf_rit;
    bool tf_crop = false;
    transform->add_option("--orig", tf_orig, "image to protect")->required();
    transform->add_option("--target", tf_target, "image to imitate")->required();
    transform->add_option("--out", tf_out, "output camouflage image")->required();
    transform->add_option("--block-size", tf_rit.block_size, "block side length");
    transform->add_option("--classes", tf_rit.class_count, "SD-rank class count (1..64)");
    transform->add_option("--shift-step", tf_rit.mean_shift_step, "mean shift quantization step");
    transform->add_option("--max-passes", tf_rit.rdh.max_passes, "embedding passes per channel");
    transform->add_flag("--center-crop", tf_crop, "crop inputs to a block-size multiple");

    // restore
    auto* restore = app.add_subcommand("restore", "recover the original from a camouflage");
    std::string rs_in, rs_out, rs_verify;
    restore->add_option("--in", rs_in, "camouflage image")->required();
    restore->add_option("--out", rs_out, "output restored image")->required();
    restore->add_option("--verify", rs_verify, "reference image to compare against");

    // make-rae
    auto* mkrae = app.add_subcommand("make-rae",
                                     "attack an image and disguise the original as the result");
    std::string mr_model, mr_in, mr_out_rae, mr_out_ae;
    int mr_label = -1;
    rae::RitConfig mr_rit;
    AttackFlags mr_flags;
    mkrae->add_option("--model", mr_model, "weight file")->required();
    mkrae->add_option("--in", mr_in, "input image")->required();
    mkrae->add_option("--out-rae", mr_out_rae, "output camouflage image")->required();
    mkrae->add_option("--out-ae", mr_out_ae, "output adversarial image");
    mkrae->add_option("--label", mr_label, "true label (default: model prediction)");
    mkrae->add_option("--block-size", mr_rit.block_size, "block side length");
    mkrae->add_option("--classes", mr_rit.class_count, "SD-rank class count (1..64)");
    mkrae->add_option("--shift-step", mr_rit.mean_shift_step, "mean shift quantization step");
    mkrae->add_option("--max-passes", mr_rit.rdh.max_passes, "embedding passes per channel");
    mr_flags.add_to(mkrae);

    // eval
    auto* eval = app.add_subcommand("eval", "run the evaluation protocol over a corpus");
    std::string ev_model, ev_corpus, ev_out;
    std::string ev_methods = "ifgsm,deepfool,cw";
    std::vector<std::string> ev_configs;
    rae::EvalConfig ev_cfg;
    eval->add_option("--model", ev_model, "weight file")->required();
    eval->add_option("--corpus", ev_corpus, "labelled image directory")->required();
    eval->add_option("--out", ev_out, "report directory")->required();
    eval->add_option("--methods", ev_methods, "comma list of default-config methods");
    eval->add_option("--config", ev_configs, "attack config file (repeatable)");
    eval->add_option("--limit", ev_cfg.limit, "images per attack config (0 = all)");
    eval->add_option("--block-size", ev_cfg.rit.block_size, "block side length");
    eval->add_option("--classes", ev_cfg.rit.class_count, "SD-rank class count (1..64)");
    eval->add_option("--shift-step", ev_cfg.rit.mean_shift_step, "mean shift quantization step");
    eval->add_option("--max-passes", ev_cfg.rit.rdh.max_passes, "embedding passes per channel");

    // capacity
    auto* capacity = app.add_subcommand("capacity", "report the embedding capacity of an image");
    std::string cp_in;
    rae::RdhConfig cp_cfg;
    capacity->add_option("--in", cp_in, "image file")->required();
    capacity->add_option("--max-passes", cp_cfg.max_passes, "embedding passes per channel");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(Errc::usage);
    }

#ifdef _OPENMP
    omp_set_num_threads(jobs);
#endif

    try {
        if (mkds->parsed()) {
            rae::Dataset train_split = rae::make_synthetic_digits(ds_train, ds_seed, ds_size);
            rae::Dataset test_split = rae::make_synthetic_digits(ds_test, ds_seed + 1, ds_size);
            rae::save_dataset(train_split, ds_out + "/train");
            rae::save_dataset(test_split, ds_out + "/test");
            std::printf("wrote %zu training and %zu test images under %s\n",
                        train_split.size(), test_split.size(), ds_out.c_str());
        } else if (train->parsed()) {
            const rae::Dataset train_split = rae::load_dataset(tr_data + "/train");
            rae::Model model = rae::Model::make_default(train_split.channels, train_split.height,
                                                        train_split.width, train_split.classes,
                                                        tr_cfg.seed);
            rae::train_sgd(model, train_split, tr_cfg, [](int epoch, double loss, double acc) {
                std::printf("epoch %d: loss %.4f, train accuracy %.4f\n", epoch, loss, acc);
            });
            rae::save_model(model, tr_out);
            std::printf("saved weights to %s\n", tr_out.c_str());
            try {
                const rae::Dataset test_split = rae::load_dataset(tr_data + "/test");
                std::printf("test accuracy: %.4f\n", rae::dataset_accuracy(model, test_split));
            } catch (const Error&) {
                std::printf("no test split found, skipping test accuracy\n");
            }
        } else if (attack->parsed()) {
            const rae::Model model = rae::load_model(at_model);
            const Image img = rae::load_image(at_in);
            const int label = at_label >= 0 ? at_label : rae::predict_label(model, img);
            const rae::AttackOutcome a = rae::run_attack(model, img, label, at_flags.resolve());
            rae::save_image(a.adversarial, at_out);
            print_attack_outcome(a, label);
            std::printf("psnr(orig, ae):    %.2f dB\n", rae::psnr(img, a.adversarial));
        } else if (transform->parsed()) {
            Image orig = rae::load_image(tf_orig);
            Image target = rae::load_image(tf_target);
            if (tf_crop) {
                orig = center_crop(orig, tf_rit.block_size);
                target = center_crop(target, tf_rit.block_size);
            }
            const rae::TransformResult tr = rae::rit_transform(orig, target, tf_rit);
            rae::save_image(tr.camouflage, tf_out);
            std::printf("aux payload:       %zu bits (%zu passes used)\n", tr.aux_bits,
                        tr.rdh_info.passes.size());
            std::printf("psnr(camo, target): %.2f dB\n", rae::psnr(tr.camouflage, target));
        } else if (restore->parsed()) {
            const Image camo = rae::load_image(rs_in);
            const Image restored = rae::rit_restore(camo);
            rae::save_image(restored, rs_out);
            std::printf("restored %dx%dx%d image to %s\n", restored.width, restored.height,
                        restored.channels, rs_out.c_str());
            if (!rs_verify.empty()) {
                const Image ref = rae::load_image(rs_verify);
                if (!(restored == ref))
                    throw Error(Errc::integrity, "restored image differs from " + rs_verify);
                std::printf("verify: exact match with %s\n", rs_verify.c_str());
            }
        } else if (mkrae->parsed()) {
            const rae::Model model = rae::load_model(mr_model);
            const Image img = rae::load_image(mr_in);
            const int label = mr_label >= 0 ? mr_label : rae::predict_label(model, img);
            const rae::RaeResult res =
                rae::make_rae(model, img, label, mr_flags.resolve(), mr_rit);
            rae::save_image(res.rae, mr_out_rae);
            if (!mr_out_ae.empty()) rae::save_image(res.ae, mr_out_ae);
            print_attack_outcome(res.attack, label);
            std::printf("camouflage label:  %d\n", rae::predict_label(model, res.rae));
            std::printf("psnr(orig, ae):    %.2f dB\n", rae::psnr(img, res.ae));
            std::printf("psnr(rae, ae):     %.2f dB\n", rae::psnr(res.rae, res.ae));
            std::printf("psnr(rae, orig):   %.2f dB\n", rae::psnr(res.rae, img));
            std::printf("aux payload:       %zu bits\n", res.aux_bits);
            std::printf("capacity of ae:    %lld bits\n",
                        static_cast<long long>(rae::rdh_capacity(res.ae, mr_rit.rdh)));
            std::printf("residual baseline: %lld bits\n",
                        static_cast<long long>(rae::residual_payload_bits(img, res.ae)));
        } else if (eval->parsed()) {
            const rae::Model model = rae::load_model(ev_model);
            const rae::Dataset corpus = rae::load_dataset(ev_corpus);
            std::stringstream methods(ev_methods);
            std::string item;
            while (std::getline(methods, item, ',')) {
                if (item.empty()) continue;
                rae::AttackConfig cfg;
                rae::apply_config_entry(cfg, "method", item);
                ev_cfg.attacks.push_back(cfg);
            }
            for (const std::string& path : ev_configs)
                ev_cfg.attacks.push_back(rae::load_attack_config(path));
            ev_cfg.policy = jobs == 1 ? rae::Exec::serial : rae::Exec::parallel;
            const rae::EvalReport report = rae::evaluate(model, corpus, ev_cfg);
            rae::write_report(report, ev_out);
            std::printf("%s", rae::summary_table(report).c_str());
            std::printf("report written to %s\n", ev_out.c_str());
        } else if (capacity->parsed()) {
            const Image img = rae::load_image(cp_in);
            std::printf("embedding capacity: %lld bits\n",
                        static_cast<long long>(rae::rdh_capacity(img, cp_cfg)));
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}
