#include "rae/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "rae/bitstream.hpp"

namespace rae {

RaeResult make_rae(const Model& m, const Image& original, int true_label,
                   const AttackConfig& atk, const RitConfig& rit) {
    RaeResult out;
    out.attack = run_attack(m, original, true_label, atk);
    out.ae = out.attack.adversarial;
    TransformResult tr = rit_transform(original, out.ae, rit);
    out.rae = std::move(tr.camouflage);
    out.aux_bits = tr.aux_bits;
    out.rdh_info = std::move(tr.rdh_info);
    return out;
}

std::int64_t residual_payload_bits(const Image& original, const Image& ae) {
    if (!original.same_shape(ae))
        throw Error(Errc::usage, "residual: image shapes differ");
    const std::size_t n = original.sample_count();
    // Per sample: 1 bit flags a zero residual; otherwise a sign bit plus the
    // Elias-gamma code of the magnitude (2*floor(log2 m) + 1 bits).
    std::int64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int d = static_cast<int>(original.pixels[i]) - ae.pixels[i];
        if (d == 0) {
            bits += 1;
        } else {
            unsigned m = static_cast<unsigned>(d < 0 ? -d : d);
            int lg = 0;
            while (m >> (lg + 1)) ++lg;
            bits += 2 + 2 * lg + 1;
        }
    }
    return bits;
}

std::string config_name(const AttackConfig& cfg) {
    char buf[64];
    if (cfg.method == "ifgsm") {
        std::snprintf(buf, sizeof(buf), "ifgsm-e%d",
                      static_cast<int>(std::lround(cfg.epsilon * 255.0)));
    } else if (cfg.method == "deepfool") {
        std::snprintf(buf, sizeof(buf), "deepfool");
    } else {
        std::snprintf(buf, sizeof(buf), "cw-k%g", cfg.kappa);
    }
    return buf;
}

namespace {

EvalRow eval_one(const Model& m, const Image& original, int label, const std::string& image_id,
                 const AttackConfig& atk, const RitConfig& rit) {
    EvalRow row;
    row.method = config_name(atk);
    row.image_id = image_id;
    row.label = label;

    AttackOutcome ao = run_attack(m, original, label, atk);
    row.ae_label = ao.predicted_label;
    row.ae_success = ao.success;
    row.ae_success_pre_round = ao.success_pre_round;
    row.iterations = ao.iterations_used;
    row.psnr_orig_ae = psnr(original, ao.adversarial);
    row.residual_bits = residual_payload_bits(original, ao.adversarial);
    row.capacity_bits = rdh_capacity(ao.adversarial, rit.rdh);

    try {
        TransformResult tr = rit_transform(original, ao.adversarial, rit, Exec::serial);
        row.embed_ok = true;
        row.aux_bits = static_cast<std::int64_t>(tr.aux_bits);
        row.rae_label = predict_label(m, tr.camouflage);
        row.rae_success = row.rae_label != label;
        row.psnr_rae_ae = psnr(tr.camouflage, ao.adversarial);
        row.psnr_rae_orig = psnr(tr.camouflage, original);
        const Image restored = rit_restore(tr.camouflage, Exec::serial);
        row.restore_exact = restored == original;
    } catch (const Error& e) {
        row.embed_ok = false;
        row.error = e.what();
    }
    return row;
}

double mean_finite(const std::vector<double>& v) {
    double sum = 0.0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    return n ? sum / n : 0.0;
}

nlohmann::ordered_json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;  // infinite PSNR and the like
    return v;
}

}  // namespace

EvalReport evaluate(const Model& m, const Dataset& corpus, const EvalConfig& cfg) {
    if (cfg.attacks.empty()) throw Error(Errc::usage, "evaluate: no attack configs given");

    EvalReport report;
    report.corpus_images = static_cast<int>(corpus.size());

    // Keep correctly-classified images, in corpus order.
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (predict_label(m, corpus.images[i]) == corpus.labels[i]) usable.push_back(i);
    report.usable_images = static_cast<int>(usable.size());
    if (cfg.limit > 0 && static_cast<int>(usable.size()) > cfg.limit)
        usable.resize(static_cast<std::size_t>(cfg.limit));
    report.evaluated_images = static_cast<int>(usable.size());
    if (usable.empty()) throw Error(Errc::usage, "evaluate: no correctly-classified images");

    const std::size_t total = cfg.attacks.size() * usable.size();
    report.rows.resize(total);
    // Each item is independent and writes its own slot; aggregation below
    // runs serially in index order, so the worker count cannot change the
    // report.
    if (cfg.policy == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long t = 0; t < static_cast<long long>(total); ++t) {
            const std::size_t a = static_cast<std::size_t>(t) / usable.size();
            const std::size_t i = usable[static_cast<std::size_t>(t) % usable.size()];
            report.rows[static_cast<std::size_t>(t)] =
                eval_one(m, corpus.images[i], corpus.labels[i], corpus.ids[i], cfg.attacks[a],
                         cfg.rit);
        }
    } else {
        for (std::size_t t = 0; t < total; ++t) {
            const std::size_t a = t / usable.size();
            const std::size_t i = usable[t % usable.size()];
            report.rows[t] = eval_one(m, corpus.images[i], corpus.labels[i], corpus.ids[i],
                                      cfg.attacks[a], cfg.rit);
        }
    }

    std::sort(report.rows.begin(), report.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        return a.method != b.method ? a.method < b.method : a.image_id < b.image_id;
    });

    // Per-method aggregates.
    std::size_t r = 0;
    int restores = 0, exact = 0;
    while (r < report.rows.size()) {
        std::size_t end = r;
        while (end < report.rows.size() && report.rows[end].method == report.rows[r].method)
            ++end;
        MethodSummary s;
        s.method = report.rows[r].method;
        s.images = static_cast<int>(end - r);
        std::vector<double> p_oa, p_ra, p_ro, aux, cap, res;
        int ae_ok = 0, ae_pre = 0, rae_ok = 0, m_restores = 0, m_exact = 0;
        for (std::size_t k = r; k < end; ++k) {
            const EvalRow& row = report.rows[k];
            ae_ok += row.ae_success;
            ae_pre += row.ae_success_pre_round;
            cap.push_back(static_cast<double>(row.capacity_bits));
            res.push_back(static_cast<double>(row.residual_bits));
            p_oa.push_back(row.psnr_orig_ae);
            if (!row.embed_ok) {
                ++s.embed_failures;
                continue;
            }
            rae_ok += row.rae_success;
            ++m_restores;
            m_exact += row.restore_exact;
            p_ra.push_back(row.psnr_rae_ae);
            p_ro.push_back(row.psnr_rae_orig);
            aux.push_back(static_cast<double>(row.aux_bits));
        }
        s.ae_success_rate = static_cast<double>(ae_ok) / s.images;
        s.ae_pre_round_success_rate = static_cast<double>(ae_pre) / s.images;
        s.rae_success_rate =
            m_restores ? static_cast<double>(rae_ok) / m_restores : 0.0;
        s.restore_exact_rate = m_restores ? static_cast<double>(m_exact) / m_restores : 0.0;
        s.mean_psnr_orig_ae = mean_finite(p_oa);
        s.mean_psnr_rae_ae = mean_finite(p_ra);
        s.mean_psnr_rae_orig = mean_finite(p_ro);
        s.mean_aux_bits = mean_finite(aux);
        s.mean_capacity_bits = mean_finite(cap);
        s.mean_residual_bits = mean_finite(res);
        report.summaries.push_back(std::move(s));
        restores += m_restores;
        exact += m_exact;
        r = end;
    }
    report.restore_exact_rate = restores ? static_cast<double>(exact) / restores : 0.0;
    return report;
}

void write_report(const EvalReport& report, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::io, out_dir + ": " + ec.message());

    const std::string records_path = out_dir + "/records.jsonl";
    std::ofstream records(records_path, std::ios::binary | std::ios::trunc);
    if (!records) throw Error(Errc::io, records_path + ": cannot open for writing");
    for (const EvalRow& row : report.rows) {
        nlohmann::ordered_json j;
        j["method"] = row.method;
        j["image"] = row.image_id;
        j["label"] = row.label;
        j["ae_label"] = row.ae_label;
        j["ae_success"] = row.ae_success;
        j["ae_success_pre_round"] = row.ae_success_pre_round;
        j["iterations"] = row.iterations;
        j["embed_ok"] = row.embed_ok;
        if (!row.embed_ok) {
            j["error"] = row.error;
        } else {
            j["rae_label"] = row.rae_label;
            j["rae_success"] = row.rae_success;
            j["restore_exact"] = row.restore_exact;
            j["psnr_rae_ae"] = json_number(row.psnr_rae_ae);
            j["psnr_rae_orig"] = json_number(row.psnr_rae_orig);
            j["aux_bits"] = row.aux_bits;
        }
        j["psnr_orig_ae"] = json_number(row.psnr_orig_ae);
        j["capacity_bits"] = row.capacity_bits;
        j["residual_bits"] = row.residual_bits;
        records << j.dump() << '\n';
    }
    records.flush();
    if (!records) throw Error(Errc::io, records_path + ": write failure");

    nlohmann::ordered_json summary;
    summary["corpus_images"] = report.corpus_images;
    summary["usable_images"] = report.usable_images;
    summary["evaluated_images"] = report.evaluated_images;
    summary["restore_exact_rate"] = report.restore_exact_rate;
    summary["methods"] = nlohmann::ordered_json::array();
    for (const MethodSummary& s : report.summaries) {
        nlohmann::ordered_json j;
        j["method"] = s.method;
        j["images"] = s.images;
        j["embed_failures"] = s.embed_failures;
        j["ae_success_rate"] = s.ae_success_rate;
        j["ae_pre_round_success_rate"] = s.ae_pre_round_success_rate;
        j["rae_success_rate"] = s.rae_success_rate;
        j["restore_exact_rate"] = s.restore_exact_rate;
        j["mean_psnr_orig_ae"] = json_number(s.mean_psnr_orig_ae);
        j["mean_psnr_rae_ae"] = json_number(s.mean_psnr_rae_ae);
        j["mean_psnr_rae_orig"] = json_number(s.mean_psnr_rae_orig);
        j["mean_aux_bits"] = s.mean_aux_bits;
        j["mean_capacity_bits"] = s.mean_capacity_bits;
        j["mean_residual_bits"] = s.mean_residual_bits;
        summary["methods"].push_back(j);
    }
    const std::string summary_path = out_dir + "/summary.json";
    std::ofstream sf(summary_path, std::ios::binary | std::ios::trunc);
    if (!sf) throw Error(Errc::io, summary_path + ": cannot open for writing");
    sf << summary.dump(2) << '\n';
    sf.flush();
    if (!sf) throw Error(Errc::io, summary_path + ": write failure");
}

std::string summary_table(const EvalReport& report) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof(line), "%-12s %6s %8s %8s %9s %9s %9s %9s %8s\n", "method",
                  "images", "ae-succ", "rae-succ", "exact", "psnr-oa", "psnr-ra", "psnr-ro",
                  "aux-bits");
    out += line;
    for (const MethodSummary& s : report.summaries) {
        std::snprintf(line, sizeof(line), "%-12s %6d %7.1f%% %7.1f%% %8.1f%% %9.2f %9.2f %9.2f %8.0f\n",
                      s.method.c_str(), s.images, 100.0 * s.ae_success_rate,
                      100.0 * s.rae_success_rate, 100.0 * s.restore_exact_rate,
                      s.mean_psnr_orig_ae, s.mean_psnr_rae_ae, s.mean_psnr_rae_orig,
                      s.mean_aux_bits);
        out += line;
    }
    std::snprintf(line, sizeof(line), "restore_exact_rate: %.4f over %d images (%d usable)\n",
                  report.restore_exact_rate, report.evaluated_images, report.usable_images);
    out += line;
    return out;
}

}  // namespace rae
