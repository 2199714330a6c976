#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rae/attacks.hpp"
#include "rae/common.hpp"
#include "rae/dataset.hpp"
#include "rae/image.hpp"
#include "rae/net.hpp"
#include "rae/rit.hpp"

namespace rae {

// End-to-end pipeline: attack an image, then disguise the original as its
// adversarial example. The camouflage ("reversible adversarial example") is
// itself fed to the classifier, and restoration must reproduce the original
// bit-exactly.

struct RaeResult {
    Image rae;  // camouflage carrying the aux payload
    Image ae;   // rounded adversarial example
    AttackOutcome attack;
    std::size_t aux_bits = 0;
    EmbedRecord rdh_info;
};

RaeResult make_rae(const Model& m, const Image& original, int true_label,
                   const AttackConfig& atk, const RitConfig& rit);

// Payload accounting against a residual-embedding baseline: embedding the
// original image's full residual (original minus adversarial) versus the
// transformation's aux payload and the carrier's embedding capacity. The
// residual is costed per sample: 1 bit for "zero", otherwise a sign bit plus
// an Elias-gamma code of the magnitude, so the payload grows with the
// perturbation strength.
struct PayloadComparison {
    std::int64_t residual_bits = 0;   // residual-embedding baseline
    std::int64_t aux_bits = 0;        // what the transformation needs
    std::int64_t capacity_bits = 0;   // what the adversarial image offers
};

std::int64_t residual_payload_bits(const Image& original, const Image& ae);

// Short config name used as the record key, e.g. "ifgsm-e8" or "cw-k0".
std::string config_name(const AttackConfig& cfg);

struct EvalRow {
    std::string method;
    std::string image_id;
    int label = -1;
    bool embed_ok = false;       // transformation fit into the carrier
    std::string error;           // set when embed_ok is false
    // Attack results.
    int ae_label = -1;
    bool ae_success = false;
    bool ae_success_pre_round = false;
    int iterations = 0;
    // Camouflage results.
    int rae_label = -1;
    bool rae_success = false;
    bool restore_exact = false;
    double psnr_orig_ae = 0.0;
    double psnr_rae_ae = 0.0;
    double psnr_rae_orig = 0.0;
    std::int64_t aux_bits = 0;
    std::int64_t capacity_bits = 0;
    std::int64_t residual_bits = 0;
};

struct MethodSummary {
    std::string method;
    int images = 0;
    int embed_failures = 0;
    double ae_success_rate = 0.0;
    double ae_pre_round_success_rate = 0.0;
    double rae_success_rate = 0.0;
    double restore_exact_rate = 0.0;  // over performed restores
    double mean_psnr_orig_ae = 0.0;
    double mean_psnr_rae_ae = 0.0;
    double mean_psnr_rae_orig = 0.0;
    double mean_aux_bits = 0.0;
    double mean_capacity_bits = 0.0;
    double mean_residual_bits = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;  // sorted by (method, image_id)
    std::vector<MethodSummary> summaries;
    int corpus_images = 0;
    int usable_images = 0;      // correctly classified (before the limit)
    int evaluated_images = 0;   // after applying the limit
    double restore_exact_rate = 0.0;  // overall, must be 1.0
};

struct EvalConfig {
    std::vector<AttackConfig> attacks;
    RitConfig rit;
    int limit = 100;  // images per attack config; 0 = no limit
    Exec policy = Exec::parallel;
};

// Runs every attack config over the correctly-classified corpus images.
// Rows are computed independently per (config, image) and then aggregated in
// a fixed order, so the report bytes do not depend on the worker count.
EvalReport evaluate(const Model& m, const Dataset& corpus, const EvalConfig& cfg);

// records.jsonl (one row per line) and summary.json under out_dir.
void write_report(const EvalReport& report, const std::string& out_dir);

// Human-readable per-method table.
std::string summary_table(const EvalReport& report);

}  // namespace rae
