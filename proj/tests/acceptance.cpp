// Acceptance gate for the tailforge laboratory.
//
// Runs ten end-to-end criteria on the standard synthetic benchmark (50
// classes, max 200 per class, imbalance ratio 100, 20% symmetric label noise,
// 24x24 glyphs, balanced 10-per-class validation split) and prints exactly one
// pass/fail line per criterion with the measured quantities and their pinned
// tolerances. Exit code 0 iff every criterion passes.
//
// The binary expects TAILFORGE_BIN to point at the CLI executable (criterion 9
// exercises cross-process determinism under different TAILFORGE_THREADS).
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailforge/cleaning.hpp"
#include "tailforge/config.hpp"
#include "tailforge/dataset.hpp"
#include "tailforge/ensemble.hpp"
#include "tailforge/experiment.hpp"
#include "tailforge/gradcheck.hpp"
#include "tailforge/model.hpp"
#include "tailforge/rebalance.hpp"
#include "tailforge/rng.hpp"
#include "tailforge/sampler.hpp"
#include "tailforge/trainer.hpp"
#include "tailforge/tta.hpp"
#include "tailforge/util.hpp"

namespace fs = std::filesystem;
using namespace tailforge;
using clock_t_ = std::chrono::steady_clock;

namespace {

double secs_since(clock_t_::time_point t0) {
    return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[768];
    std::snprintf(buf, sizeof buf, f, args...);
    return std::string(buf);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---- shared benchmark fixtures -------------------------------------------

synth::DatasetSpec standard_spec(std::uint64_t seed) {
    synth::DatasetSpec spec;  // defaults are the standard benchmark
    spec.seed = seed;
    return spec;
}

train::TrainerConfig ibs_tcfg() {
    train::TrainerConfig tcfg;  // IBS, 24 epochs, decay {14,20}
    return tcfg;
}

train::TrainerConfig cbs36_tcfg() {
    train::TrainerConfig tcfg;
    tcfg.scheme = sampling::Scheme::class_balanced;
    tcfg.optim.total_epochs = 36;
    tcfg.optim.decay_epochs = {21, 30};
    return tcfg;
}

// Seed-0 dataset and IBS baseline, built once and reused across criteria.
struct Shared {
    std::optional<synth::GeneratedData> data0;
    std::optional<nn::ModelParams<float>> ibs0;

    synth::GeneratedData& dataset0() {
        if (!data0) data0 = synth::gen_dataset(standard_spec(0));
        return *data0;
    }
    nn::ModelParams<float>& model0() {
        if (!ibs0) {
            synth::GeneratedData& pair = dataset0();
            train::TrainView view = train::full_view(pair.train);
            ibs0 = train::train_model(pair.train, view, ibs_tcfg(), 0).params;
        }
        return *ibs0;
    }
    std::vector<int> counts0() {
        synth::GeneratedData& pair = dataset0();
        return {pair.train.class_counts.begin(), pair.train.class_counts.end()};
    }
};

// ---- criterion 1: gradient exactness -------------------------------------

Outcome criterion1() {
    auto t0 = clock_t_::now();
    nn::GradcheckConfig cfg;  // h = 1e-5, tolerance = 1e-5
    nn::GradcheckReport rep = nn::run_gradcheck(cfg, 20, 2026);
    double secs = secs_since(t0);
    Outcome o;
    o.pass = rep.pass && rep.draws == 20 && rep.max_rel_err < 1e-5 && secs < 60.0;
    o.detail = fmt(
        "gradient exactness: 20 draws in 64-bit, %d scalar checks, max rel err %.3g < 1e-05 vs "
        "central differences (h=1e-5), %.1fs < 60s",
        rep.checks, rep.max_rel_err, secs);
    return o;
}

// ---- criterion 2: tau-normalization algebra ------------------------------

Outcome criterion2() {
    Rng rng(777);
    const int c = 5, d = 8;

    auto fill = [&](std::vector<double>& w) {
        for (double& x : w) x = rng.normal();
    };
    auto row_norm = [&](const std::vector<double>& w, int i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += w[i * d + j] * w[i * d + j];
        return std::sqrt(s);
    };

    std::vector<double> w0(static_cast<std::size_t>(c) * d);
    fill(w0);
    std::vector<double> id = decouple::tau_normalize(w0, c, d, 0.0);
    bool bitwise = std::memcmp(id.data(), w0.data(), w0.size() * sizeof(double)) == 0;

    std::vector<double> unit = decouple::tau_normalize(w0, c, d, 1.0);
    double max_norm_dev = 0.0;
    for (int i = 0; i < c; ++i) max_norm_dev = std::max(max_norm_dev, std::fabs(row_norm(unit, i) - 1.0));

    double max_ratio_err = 0.0;
    for (int m = 0; m < 100; ++m) {
        std::vector<double> w(static_cast<std::size_t>(c) * d);
        fill(w);
        double tau = rng.uniform(0.1, 1.5);
        std::vector<double> out = decouple::tau_normalize(w, c, d, tau);
        for (int i = 0; i < c; ++i) {
            for (int j = i + 1; j < c; ++j) {
                double lhs = row_norm(out, i) / row_norm(out, j);
                double rhs = std::pow(row_norm(w, i) / row_norm(w, j), 1.0 - tau);
                max_ratio_err = std::max(max_ratio_err, std::fabs(lhs - rhs) / std::fabs(rhs));
            }
        }
    }

    Outcome o;
    o.pass = bitwise && max_norm_dev <= 1e-12 && max_ratio_err <= 1e-9;
    o.detail = fmt(
        "tau-normalization algebra: tau=0 bitwise identity %s, tau=1 max |row norm - 1| = %.3g <= "
        "1e-12, ratio-law max rel err %.3g <= 1e-09 over 100 random matrices",
        bitwise ? "yes" : "NO", max_norm_dev, max_ratio_err);
    return o;
}

// ---- criterion 3: sampler statistics -------------------------------------

Outcome criterion3() {
    std::vector<int> counts = synth::gen_class_counts(10, 1000, 1000.0, synth::Profile::exponential);
    std::vector<int> labels;
    for (int ci = 0; ci < 10; ++ci) labels.insert(labels.end(), counts[ci], ci);
    const int n = static_cast<int>(labels.size());

    std::vector<std::vector<int>> by_class = sampling::group_by_class(labels, 10);
    Rng rng(99);
    std::vector<int> draws = sampling::class_balanced_epoch(by_class, 100000, rng);
    std::vector<long> obs(10, 0);
    for (int pos : draws) obs[labels[static_cast<std::size_t>(pos)]]++;
    double chi2 = 0.0;
    for (long o : obs) {
        double diff = static_cast<double>(o) - 10000.0;
        chi2 += diff * diff / 10000.0;
    }

    Rng rng2(7);
    std::vector<int> perm = sampling::instance_balanced_epoch(n, rng2);
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    bool is_perm = static_cast<int>(perm.size()) == n;
    for (int i = 0; i < n && is_perm; ++i) is_perm = sorted[static_cast<std::size_t>(i)] == i;

    Outcome o;
    o.pass = chi2 < 27.88 && is_perm;
    o.detail = fmt(
        "sampler statistics: CBS chi-square %.2f < 27.88 over 1e5 draws (C=10, counts 1000..1), IBS "
        "epoch exact permutation %s",
        chi2, is_perm ? "yes" : "NO");
    return o;
}

// ---- criterion 4: cleaning oracle ----------------------------------------

Outcome criterion4() {
    auto t0 = clock_t_::now();
    std::vector<double> precisions, gains;
    for (std::uint64_t s = 0; s < 5; ++s) {
        synth::GeneratedData pair = synth::gen_dataset(standard_spec(s));
        std::vector<int> counts(pair.train.class_counts.begin(), pair.train.class_counts.end());
        train::TrainerConfig tcfg = cbs36_tcfg();
        train::TrainView view = train::full_view(pair.train);
        train::TrainResult base = train::train_model(pair.train, view, tcfg, s);
        double base_top1 = train::evaluate_model(base.params, pair.val, counts).top1_accuracy;

        cleanse::CleaningConfig ccfg;
        ccfg.rounds = 3;
        ccfg.rule = cleanse::Rule::drop_lowlabelprob;
        ccfg.conf_threshold = 0.015;
        ccfg.threshold_mode = cleanse::ThresholdMode::absolute;
        ccfg.topk = 50;
        cleanse::CleanResult cleaned =
            cleanse::iterative_clean(pair.train, pair.val, tcfg, ccfg, s, &base.params);

        precisions.push_back(cleaned.history.rounds.at(0).oracle_precision);
        double final_top1 = train::evaluate_model(cleaned.model, pair.val, counts).top1_accuracy;
        gains.push_back(final_top1 - base_top1);
    }
    double secs = secs_since(t0);
    double mean_prec = mean(precisions), mean_gain = mean(gains);

    Outcome o;
    o.pass = mean_prec >= 0.7 && mean_gain >= 0.02 && secs < 600.0;
    o.detail = fmt(
        "cleaning oracle: 3-round iterative_clean over 5 seeds, mean round-1 drop precision %.3f >= "
        "0.70 vs flip ledger, mean top-1 gain %+0.4f >= +0.0200 over baseline, %.0fs < 600s",
        mean_prec, mean_gain, secs);
    return o;
}

// ---- criteria 5 and 6: rebalancing and TTA direction ----------------------

struct C56 {
    Outcome c5, c6;
};

C56 criteria5and6(Shared& shared) {
    std::vector<double> ibs_top1, crt_top1, mcer_tau0, mcer_best, tail_tau0, tail_best;
    std::vector<double> ten_top1, cen_top1;
    bool all_best_tau_positive = true;
    double min_best_tau = 2.0;

    for (std::uint64_t s = 0; s < 5; ++s) {
        synth::GeneratedData local;
        synth::GeneratedData& pair = (s == 0) ? shared.dataset0()
                                              : (local = synth::gen_dataset(standard_spec(s)), local);
        const synth::Dataset& val = pair.val;
        std::vector<int> counts(pair.train.class_counts.begin(), pair.train.class_counts.end());
        std::vector<int> labels(val.labels.begin(), val.labels.end());
        train::TrainView view = train::full_view(pair.train);

        nn::ModelParams<float> local_model;
        nn::ModelParams<float>& ibs =
            (s == 0) ? shared.model0()
                     : (local_model = train::train_model(pair.train, view, ibs_tcfg(), s).params,
                        local_model);
        ibs_top1.push_back(train::evaluate_model(ibs, val, counts).top1_accuracy);

        train::TrainerConfig cbs = ibs_tcfg();
        cbs.scheme = sampling::Scheme::class_balanced;
        nn::ModelParams<float> crt =
            decouple::retrain_classifier(ibs, pair.train, view, cbs, 5, true, s);
        ensemble::EvalReport crt_rep = train::evaluate_model(crt, val, counts);
        crt_top1.push_back(crt_rep.top1_accuracy);
        mcer_tau0.push_back(crt_rep.mean_class_error_rate);
        tail_tau0.push_back(crt_rep.split_accuracy[2]);

        decouple::RebalanceConfig rcfg;  // grid 0.0 .. 1.0 step 0.1
        decouple::TauSearchResult search =
            decouple::grid_search_tau(crt, val, rcfg.tau_grid, counts);
        if (search.best_tau <= 0.0) all_best_tau_positive = false;
        min_best_tau = std::min(min_best_tau, search.best_tau);
        for (const decouple::TauPoint& p : search.curve) {
            if (p.tau == search.best_tau) mcer_best.push_back(p.mcer);
        }

        nn::ModelParams<float> tuned = crt;
        tuned.classifier_w = decouple::tau_normalize(crt.classifier_w, val.num_classes,
                                                     crt.d_emb(), search.best_tau);
        ensemble::EvalReport tuned_rep = train::evaluate_model(tuned, val, counts);
        tail_best.push_back(tuned_rep.split_accuracy[2]);

        img::TtaConfig ten_cfg;
        ten_cfg.train_res = 24;
        ten_cfg.enlarge_factor = 26.0 / 24.0;
        ten_cfg.crops = img::CropMode::ten_crop;
        std::vector<double> pt = img::fixres_tta_predict_all(tuned, val.images.data(), val.n, val.h,
                                                             val.w, ten_cfg);
        ten_top1.push_back(
            ensemble::eval_report(pt, val.n, val.num_classes, labels, counts).top1_accuracy);

        img::TtaConfig cen_cfg = ten_cfg;
        cen_cfg.crops = img::CropMode::center_only;
        std::vector<double> pc = img::fixres_tta_predict_all(tuned, val.images.data(), val.n, val.h,
                                                             val.w, cen_cfg);
        cen_top1.push_back(
            ensemble::eval_report(pc, val.n, val.num_classes, labels, counts).top1_accuracy);
    }

    double gain = mean(crt_top1) - mean(ibs_top1);
    C56 out;
    out.c5.pass = gain > 0.0 && all_best_tau_positive && mean(mcer_best) < mean(mcer_tau0) &&
                  mean(tail_best) > mean(tail_tau0);
    out.c5.detail = fmt(
        "rebalancing direction: 5-seed mean cRT top-1 %+0.4f over IBS baseline (%.4f vs %.4f); "
        "grid picks tau >= %.1f every seed, mean MCER %.4f < %.4f at tau=0, mean tail-tercile "
        "accuracy %.4f > %.4f",
        gain, mean(crt_top1), mean(ibs_top1), min_best_tau, mean(mcer_best), mean(mcer_tau0),
        mean(tail_best), mean(tail_tau0));

    // Pipeline collapse: enlarge_factor=1 with a center crop at the native
    // resolution must reproduce plain evaluation.
    synth::GeneratedData& pair0 = shared.dataset0();
    img::TtaConfig collapse;
    collapse.train_res = pair0.val.h;
    collapse.enlarge_factor = 1.0;
    collapse.crops = img::CropMode::center_only;
    std::vector<double> via_tta = img::fixres_tta_predict_all(
        shared.model0(), pair0.val.images.data(), pair0.val.n, pair0.val.h, pair0.val.w, collapse);
    std::vector<double> plain = train::score_dataset(shared.model0(), pair0.val);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < plain.size(); ++i) {
        max_diff = std::max(max_diff, std::fabs(via_tta[i] - plain[i]));
    }

    out.c6.pass = mean(ten_top1) >= mean(cen_top1) && max_diff <= 1e-12;
    out.c6.detail = fmt(
        "TTA direction: 5-seed mean ten-crop top-1 %.4f >= center-crop %.4f (enlarge 26/24); "
        "collapse identity (enlarge=1, center crop) max |diff| %.3g <= 1e-12 vs plain eval",
        mean(ten_top1), mean(cen_top1), max_diff);
    return out;
}

// ---- criterion 7: ensemble sanity ----------------------------------------

Outcome criterion7(Shared& shared) {
    synth::GeneratedData& pair = shared.dataset0();
    const synth::Dataset& val = pair.val;
    const int c = val.num_classes;
    std::vector<int> counts = shared.counts0();
    std::vector<int> labels(val.labels.begin(), val.labels.end());
    train::TrainView view = train::full_view(pair.train);

    // Exact fixed point: averaging a record set with itself changes nothing.
    std::vector<double> probs0 = train::score_dataset(shared.model0(), val);
    bool fixed_point = true;
    for (int i = 0; i < val.n; ++i) {
        ensemble::PredictionRecord r =
            ensemble::truncate_topk(probs0.data() + static_cast<std::size_t>(i) * c, c, 10, i);
        std::vector<double> once = ensemble::ensemble_average({r}, c);
        std::vector<double> twice = ensemble::ensemble_average({r, r}, c);
        if (std::memcmp(once.data(), twice.data(), once.size() * sizeof(double)) != 0) {
            fixed_point = false;
            break;
        }
    }

    // Five repetitions of a 3-training-seed ensemble against the best member.
    std::vector<double> deltas;
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<std::vector<ensemble::PredictionRecord>> records(3);
        double best_single = 0.0;
        for (int m = 0; m < 3; ++m) {
            std::uint64_t seed = 101 + 10 * static_cast<std::uint64_t>(rep) + m;
            train::TrainResult tr = train::train_model(pair.train, view, ibs_tcfg(), seed);
            best_single = std::max(
                best_single, train::evaluate_model(tr.params, val, counts).top1_accuracy);
            std::vector<double> probs = train::score_dataset(tr.params, val);
            records[m].reserve(static_cast<std::size_t>(val.n));
            for (int i = 0; i < val.n; ++i) {
                records[m].push_back(ensemble::truncate_topk(
                    probs.data() + static_cast<std::size_t>(i) * c, c, 10, i));
            }
        }
        std::vector<double> flat(static_cast<std::size_t>(val.n) * c);
        for (int i = 0; i < val.n; ++i) {
            std::vector<ensemble::PredictionRecord> members = {records[0][i], records[1][i],
                                                              records[2][i]};
            std::vector<double> avg = ensemble::ensemble_average(members, c);
            std::copy(avg.begin(), avg.end(), flat.begin() + static_cast<std::size_t>(i) * c);
        }
        double ens_top1 =
            ensemble::eval_report(flat, val.n, c, labels, counts).top1_accuracy;
        deltas.push_back(ens_top1 - best_single);
    }

    Outcome o;
    o.pass = fixed_point && mean(deltas) >= 0.0;
    o.detail = fmt(
        "ensemble sanity: self-ensemble bitwise fixed point %s; 3-seed ensemble vs max single "
        "top-1 mean delta %+0.4f >= 0 over 5 repetitions",
        fixed_point ? "yes" : "NO", mean(deltas));
    return o;
}

// ---- criterion 8: metric correctness -------------------------------------

Outcome criterion8(Shared& shared) {
    using ensemble::mean_class_error_rate;
    bool hand = mean_class_error_rate({0, 0, 1, 0}, {0, 0, 1, 1}, 2) == 0.25 &&
                mean_class_error_rate({1, 0}, {1, 0}, 3) == 0.0 &&
                mean_class_error_rate({0, 1, 1}, {0, 1, 0}, 3) == 0.25;

    ensemble::EvalReport rep =
        train::evaluate_model(shared.model0(), shared.dataset0().val, shared.counts0());
    double diff = std::fabs((1.0 - rep.mean_class_error_rate) - rep.top1_accuracy);

    Outcome o;
    o.pass = hand && diff <= 1e-12;
    o.detail = fmt(
        "metric correctness: hand-computed MCER values exact %s; balanced val |(1 - MCER) - top1| "
        "= %.3g <= 1e-12",
        hand ? "yes" : "NO", diff);
    return o;
}

// ---- criterion 9: determinism and formats --------------------------------

int run_shell(const std::string& cmd) {
    int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
}

Outcome criterion9(Shared& shared) {
    Outcome o;
    const char* bin = std::getenv("TAILFORGE_BIN");
    if (bin == nullptr) {
        o.detail = "determinism and formats: TAILFORGE_BIN is not set";
        return o;
    }
    fs::path tmp = fs::temp_directory_path() / "tf_acceptance";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    // (a) Bit-identical run artifacts under TAILFORGE_THREADS in {1, 4}.
    nlohmann::json cfg;
    cfg["dataset"] = {{"num_classes", 6},     {"max_count", 40}, {"imbalance_ratio", 10.0},
                      {"base_resolution", 16}, {"noise_rate", 0.2}, {"seed", 3},
                      {"val_per_class", 5}};
    cfg["optim"] = {{"batch_size", 16}, {"total_epochs", 3}, {"warmup_epochs", 1},
                    {"decay_epochs", {2}}};
    cfg["model"] = {{"channels", {6, 12}}, {"d_emb", 16}};
    fs::path cfg_path = tmp / "thr.json";
    write_text(cfg_path, cfg.dump(2) + "\n");

    fs::path run_dir = tmp / "run";
    std::string base_cmd = std::string(bin) + " train --config " + cfg_path.string() + " --out " +
                           run_dir.string() + " --quiet";
    bool threads_identical = false;
    std::string thread_note = "subprocess failed";
    if (run_shell("TAILFORGE_THREADS=1 " + base_cmd) == 0) {
        std::map<std::string, std::vector<std::uint8_t>> snap;
        std::vector<fs::path> rels = {"manifest.json", "records.jsonl", "report.json",
                                      "report_per_class.csv"};
        for (const fs::directory_entry& e : fs::directory_iterator(run_dir / "checkpoint")) {
            rels.push_back(fs::path("checkpoint") / e.path().filename());
        }
        for (const fs::path& rel : rels) snap[rel.string()] = read_bytes(run_dir / rel);
        if (run_shell("TAILFORGE_THREADS=4 " + base_cmd) == 0) {
            threads_identical = true;
            for (const auto& [rel, bytes] : snap) {
                if (read_bytes(run_dir / rel) != bytes) {
                    threads_identical = false;
                    thread_note = "mismatch in " + rel;
                }
            }
            if (threads_identical) {
                thread_note = fmt("%zu artifacts identical", snap.size());
            }
        }
    }

    // (b) Bit-exact dataset and checkpoint roundtrips.
    synth::GeneratedData& pair = shared.dataset0();
    synth::write_dataset(pair.train, tmp / "ds");
    synth::Dataset rt = synth::read_dataset(tmp / "ds");
    bool ds_exact = rt.images == pair.train.images && rt.labels == pair.train.labels &&
                    rt.true_labels == pair.train.true_labels &&
                    rt.flip_mask == pair.train.flip_mask &&
                    rt.class_counts == pair.train.class_counts;

    nn::ModelParams<float>& model = shared.model0();
    nn::save_checkpoint(model, tmp / "ckpt");
    nn::ModelParams<float> mrt = nn::load_checkpoint(tmp / "ckpt");
    bool ck_exact = mrt.embed_w == model.embed_w && mrt.embed_b == model.embed_b &&
                    mrt.bn_gamma == model.bn_gamma && mrt.bn_beta == model.bn_beta &&
                    mrt.bn_running_mean == model.bn_running_mean &&
                    mrt.bn_running_var == model.bn_running_var &&
                    mrt.classifier_w == model.classifier_w &&
                    mrt.conv.size() == model.conv.size();
    for (std::size_t l = 0; ck_exact && l < model.conv.size(); ++l) {
        ck_exact = mrt.conv[l].kernels == model.conv[l].kernels &&
                   mrt.conv[l].bias == model.conv[l].bias;
    }

    // (c) Confidence histogram: disagreeing samples sit at lower confidence.
    std::vector<int> positions(static_cast<std::size_t>(pair.train.n));
    for (int i = 0; i < pair.train.n; ++i) positions[static_cast<std::size_t>(i)] = i;
    std::vector<ensemble::PredictionRecord> recs =
        cleanse::score_training_set(model, pair.train, positions, 10);
    std::vector<int> noisy_labels(pair.train.labels.begin(), pair.train.labels.end());
    std::vector<cleanse::HistogramRow> rows = cleanse::confidence_histogram(recs, noisy_labels, 20);
    cleanse::write_histogram_csv(rows, tmp / "confidence_histogram.csv");
    double agree_mass = 0.0, agree_conf = 0.0, dis_mass = 0.0, dis_conf = 0.0;
    for (const cleanse::HistogramRow& r : rows) {
        double center = 0.5 * (r.bin_low + r.bin_high);
        agree_mass += static_cast<double>(r.agree);
        agree_conf += center * static_cast<double>(r.agree);
        dis_mass += static_cast<double>(r.disagree);
        dis_conf += center * static_cast<double>(r.disagree);
    }
    double agree_mean = agree_conf / agree_mass;
    double dis_mean = dis_conf / dis_mass;

    fs::remove_all(tmp);
    o.pass = threads_identical && ds_exact && ck_exact && dis_mean < agree_mean;
    o.detail = fmt(
        "determinism and formats: TAILFORGE_THREADS 1 vs 4 %s; dataset roundtrip bit-exact %s; "
        "checkpoint roundtrip bit-exact %s; histogram disagree mean conf %.3f < agree %.3f",
        thread_note.c_str(), ds_exact ? "yes" : "NO", ck_exact ? "yes" : "NO", dis_mean, agree_mean);
    return o;
}

// ---- criterion 10: end-to-end ladder budget ------------------------------

Outcome criterion10() {
    fs::path tmp = fs::temp_directory_path() / "tf_acceptance_ladder";
    fs::remove_all(tmp);
    nlohmann::json j;
    j["dataset"] = {{"num_classes", 50},  {"max_count", 200}, {"imbalance_ratio", 100.0},
                    {"noise_rate", 0.2},  {"seed", 0},        {"val_per_class", 10}};
    j["cleaning"] = {{"rule", "drop_lowlabelprob"}, {"conf_threshold", 0.005}};
    j["tta"] = {{"enlarge_factor", 26.0 / 24.0}};
    j["ensemble_k"] = 50;
    j["out_dir"] = tmp.string();
    runner::ExperimentConfig cfg = runner::parse_config(j);

    auto t0 = clock_t_::now();
    runner::LadderResult ladder = runner::run_ladder(cfg, /*quiet=*/true);
    double secs = secs_since(t0);

    double final_top1 = ladder.rows.empty() ? 0.0 : ladder.rows.back().top1;
    Outcome o;
    o.pass = secs < 1800.0 && ladder.rows.size() == 8;
    o.detail = fmt(
        "end-to-end budget: full 8-row ablation ladder on the standard benchmark in %.0fs < 1800s "
        "(final row top-1 %.4f)",
        secs, final_top1);
    fs::remove_all(tmp);
    return o;
}

}  // namespace

int main() {
    std::printf("tailforge acceptance gate (standard benchmark: C=50, n_max=200, ratio=100, 20%% "
                "symmetric noise)\n");
    std::fflush(stdout);

    Shared shared;
    bool all = true;
    auto emit = [&](int idx, const Outcome& o) {
        std::printf("[%s] %2d. %s\n", o.pass ? "PASS" : "FAIL", idx, o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    };
    auto guarded = [&](int idx, auto&& fn) {
        try {
            emit(idx, fn());
        } catch (const std::exception& e) {
            emit(idx, Outcome{false, fmt("exception: %s", e.what())});
        }
    };

    guarded(1, [] { return criterion1(); });
    guarded(2, [] { return criterion2(); });
    guarded(3, [] { return criterion3(); });
    guarded(4, [] { return criterion4(); });
    try {
        C56 both = criteria5and6(shared);
        emit(5, both.c5);
        emit(6, both.c6);
    } catch (const std::exception& e) {
        emit(5, Outcome{false, fmt("exception: %s", e.what())});
        emit(6, Outcome{false, fmt("exception: %s", e.what())});
    }
    guarded(7, [&] { return criterion7(shared); });
    guarded(8, [&] { return criterion8(shared); });
    guarded(9, [&] { return criterion9(shared); });
    guarded(10, [] { return criterion10(); });

    std::printf("acceptance: %s\n", all ? "ALL CRITERIA PASSED" : "FAILURES PRESENT");
    return all ? 0 : 1;
}
