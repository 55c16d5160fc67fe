#include "tailforge/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <map>

#include "tailforge/util.hpp"

namespace tailforge::runner {

using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::uint64_t stage_seed(const ExperimentConfig& cfg, Stage stage, std::size_t index) {
    std::string name = to_string(stage);
    std::uint64_t name_key = fnv1a64(reinterpret_cast<const std::uint8_t*>(name.data()), name.size());
    return derive_seed(cfg.seed, name_key, static_cast<std::uint64_t>(index));
}

// Validation copy re-rendered at the operating resolution (identity at base
// res). Re-rendering is the desk analog of resizing the original photo rather
// than upscaling an already-downscaled copy.
synth::Dataset rerender_val(const synth::Dataset& val, int res) {
    if (res == val.h) return val;
    synth::Dataset out = val;
    out.h = res;
    out.w = res;
    out.images = synth::render_at(val, res);
    return out;
}

json report_to_json(const ensemble::EvalReport& rep) {
    return json{{"mean_class_error_rate", rep.mean_class_error_rate},
                {"top1_accuracy", rep.top1_accuracy},
                {"top5_accuracy", rep.top5_accuracy},
                {"split_accuracy", {{"head", rep.split_accuracy[0]},
                                    {"medium", rep.split_accuracy[1]},
                                    {"tail", rep.split_accuracy[2]}}}};
}

std::vector<ensemble::PredictionRecord> records_from_probs(const std::vector<double>& probs, int n,
                                                           int num_classes, int k) {
    std::vector<ensemble::PredictionRecord> records(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        records[static_cast<std::size_t>(i)] =
            ensemble::truncate_topk(probs.data() + static_cast<std::size_t>(i) * num_classes,
                                    num_classes, k, i);
    }
    return records;
}

struct PipelineState {
    synth::Dataset train_data;  // operating copy (re-rendered by highres_finetune)
    synth::Dataset val_base;    // stored at base resolution
    synth::Dataset val_eval;    // re-rendered at the operating resolution
    std::vector<int> train_counts;
    train::TrainView view;
    nn::ModelParams<float> model;
    int operating_res = 0;
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, bool quiet) {
    cfg.validate();
    std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);

    PipelineState st;
    {
        synth::GeneratedData pair = synth::gen_dataset(cfg.dataset);
        st.train_data = std::move(pair.train);
        st.val_base = std::move(pair.val);
    }
    st.train_counts.assign(st.train_data.class_counts.begin(), st.train_data.class_counts.end());
    st.view = train::full_view(st.train_data);
    st.operating_res = cfg.dataset.base_resolution;
    st.val_eval = st.val_base;

    train::TrainerConfig tcfg = cfg.trainer_config();

    RunResult result;
    result.out_dir = out_dir;
    json stage_entries = json::array();
    json artifacts = json::object();

    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
        Stage stage = cfg.stages[i];
        std::uint64_t seed = stage_seed(cfg, stage, i);
        auto t0 = std::chrono::steady_clock::now();
        json entry;
        entry["stage"] = to_string(stage);
        ensemble::EvalReport report;
        bool report_is_plain = true;

        switch (stage) {
            case Stage::train: {
                st.model = train::train_model(st.train_data, st.view, tcfg, seed).params;
                break;
            }
            case Stage::clean: {
                // Fig.-1-style confidence histogram from the entering model.
                std::vector<ensemble::PredictionRecord> records = cleanse::score_training_set(
                    st.model, st.train_data, st.view.indices, cfg.ensemble_k);
                std::vector<int> aligned(st.view.indices.size());
                for (std::size_t k = 0; k < st.view.indices.size(); ++k) {
                    aligned[k] = st.view.labels[static_cast<std::size_t>(st.view.indices[k])];
                }
                cleanse::write_histogram_csv(cleanse::confidence_histogram(records, aligned, 20),
                                             out_dir / "confidence_histogram.csv");
                artifacts["confidence_histogram"] = "confidence_histogram.csv";

                cleanse::CleanResult cleaned = cleanse::iterative_clean(
                    st.train_data, st.val_eval, tcfg, cfg.cleaning, seed, &st.model);
                st.model = std::move(cleaned.model);
                st.view = std::move(cleaned.view);
                cleanse::write_history(cleaned.history, out_dir / "cleaning");
                artifacts["cleaning_history"] = "cleaning/history.json";
                json rounds = json::array();
                for (const cleanse::CleaningRound& r : cleaned.history.rounds) {
                    rounds.push_back({{"round", r.round},
                                      {"kept", r.kept},
                                      {"dropped", r.dropped},
                                      {"relabeled", r.relabeled},
                                      {"oracle_precision", r.oracle_precision},
                                      {"oracle_recall", r.oracle_recall},
                                      {"post_retrain_val_top1", r.post_retrain_val_top1}});
                }
                entry["cleaning_rounds"] = std::move(rounds);
                break;
            }
            case Stage::retrain_classifier: {
                st.model = decouple::retrain_classifier(st.model, st.train_data, st.view, tcfg,
                                                        cfg.rebalance.finetune_epochs, true, seed);
                break;
            }
            case Stage::subset_finetune: {
                std::vector<double> probs = train::score_dataset(st.model, st.train_data);
                std::vector<int> subset = decouple::build_balanced_subset(
                    st.view, probs, st.train_data.num_classes, cfg.rebalance.subset_per_class);
                entry["subset_size"] = subset.size();
                st.model = decouple::finetune_on_subset(st.model, st.train_data, st.view, subset,
                                                        cfg.rebalance.finetune_scope, tcfg,
                                                        cfg.rebalance.finetune_epochs, seed);
                break;
            }
            case Stage::highres_finetune: {
                int res = cfg.highres_resolution();
                st.train_data.images = synth::render_at(st.train_data, res);
                st.train_data.h = res;
                st.train_data.w = res;
                st.operating_res = res;
                st.val_eval = rerender_val(st.val_base, res);
                st.model = train::finetune_full(st.model, st.train_data, st.view, tcfg,
                                                cfg.highres.epochs, seed).params;
                entry["resolution"] = res;
                break;
            }
            case Stage::tau_norm: {
                if (!cfg.rebalance.tau_grid.empty()) {
                    decouple::TauSearchResult search = decouple::grid_search_tau(
                        st.model, st.val_eval, cfg.rebalance.tau_grid, st.train_counts);
                    decouple::write_tau_curve_csv(search, out_dir / "tau_curve.csv");
                    artifacts["tau_curve"] = "tau_curve.csv";
                    entry["best_tau"] = search.best_tau;
                    st.model.classifier_w = decouple::tau_normalize(
                        st.model.classifier_w, st.model.num_classes, st.model.d_emb(), search.best_tau);
                } else {
                    entry["best_tau"] = cfg.rebalance.tau;
                    st.model.classifier_w = decouple::tau_normalize(
                        st.model.classifier_w, st.model.num_classes, st.model.d_emb(), cfg.rebalance.tau);
                }
                break;
            }
            case Stage::tta_eval: {
                img::TtaConfig tta = cfg.tta;
                if (tta.train_res == 0) tta.train_res = st.operating_res;
                std::vector<double> probs = img::fixres_tta_predict_all(
                    st.model, st.val_eval.images.data(), st.val_eval.n, st.val_eval.h, st.val_eval.w, tta);
                std::vector<int> labels(st.val_eval.labels.begin(), st.val_eval.labels.end());
                report = ensemble::eval_report(probs, st.val_eval.n, st.val_eval.num_classes, labels,
                                               st.train_counts);
                report_is_plain = false;
                std::vector<ensemble::PredictionRecord> records =
                    records_from_probs(probs, st.val_eval.n, st.val_eval.num_classes, cfg.ensemble_k);
                ensemble::write_records(records, out_dir / "records.jsonl");
                result.records_path = out_dir / "records.jsonl";
                artifacts["records"] = "records.jsonl";
                break;
            }
            case Stage::eval: {
                std::vector<double> probs = train::score_dataset(st.model, st.val_eval);
                std::vector<int> labels(st.val_eval.labels.begin(), st.val_eval.labels.end());
                report = ensemble::eval_report(probs, st.val_eval.n, st.val_eval.num_classes, labels,
                                               st.train_counts);
                report_is_plain = false;
                std::vector<ensemble::PredictionRecord> records =
                    records_from_probs(probs, st.val_eval.n, st.val_eval.num_classes, cfg.ensemble_k);
                ensemble::write_records(records, out_dir / "records.jsonl");
                result.records_path = out_dir / "records.jsonl";
                artifacts["records"] = "records.jsonl";
                ensemble::write_report(report, st.train_counts, out_dir / "report.json",
                                       out_dir / "report_per_class.csv");
                artifacts["report"] = "report.json";
                break;
            }
        }

        if (report_is_plain) {
            report = train::evaluate_model(st.model, st.val_eval, st.train_counts);
        }
        entry["report"] = report_to_json(report);
        stage_entries.push_back(std::move(entry));

        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.outcomes.push_back({stage, report, secs});
        if (!quiet) {
            std::printf("[%s] top1=%.4f mcer=%.4f (%.2fs)\n", to_string(stage).c_str(),
                        report.top1_accuracy, report.mean_class_error_rate, secs);
        }
    }

    nn::save_checkpoint(st.model, out_dir / "checkpoint");
    artifacts["checkpoint"] = "checkpoint";

    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config_hash"] = config_hash(cfg);
    manifest["config"] = resolved_config(cfg);
    manifest["stages"] = std::move(stage_entries);
    manifest["artifacts"] = std::move(artifacts);
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

    // Wall-clock lives outside the manifest so identical runs stay bit-identical.
    json timing;
    double total = 0.0;
    json per_stage = json::array();
    for (const StageOutcome& o : result.outcomes) {
        per_stage.push_back({{"stage", to_string(o.stage)}, {"seconds", o.wall_seconds}});
        total += o.wall_seconds;
    }
    timing["stages"] = std::move(per_stage);
    timing["total_seconds"] = total;
    write_text(out_dir / "timing.json", timing.dump(2) + "\n");

    result.manifest = std::move(manifest);
    result.model = std::move(st.model);
    return result;
}

ensemble::EvalReport ensemble_records(const std::vector<std::filesystem::path>& record_files,
                                      const synth::Dataset& val,
                                      const std::vector<int>& train_class_counts) {
    if (record_files.size() < 2) {
        throw ConfigError("ensemble: need at least 2 record files");
    }
    std::vector<std::vector<ensemble::PredictionRecord>> all;
    for (const std::filesystem::path& p : record_files) {
        all.push_back(ensemble::read_records(p));
        if (all.back().size() != static_cast<std::size_t>(val.n)) {
            throw IoError(IoError::Code::validation,
                          "record file " + p.string() + " has " + std::to_string(all.back().size()) +
                              " records, validation set has " + std::to_string(val.n));
        }
    }
    std::vector<std::vector<double>> dense(static_cast<std::size_t>(val.n));
    std::vector<ensemble::PredictionRecord> per_sample(all.size());
    for (int i = 0; i < val.n; ++i) {
        for (std::size_t m = 0; m < all.size(); ++m) {
            const ensemble::PredictionRecord& r = all[m][static_cast<std::size_t>(i)];
            if (r.sample_id != all[0][static_cast<std::size_t>(i)].sample_id) {
                throw IoError(IoError::Code::validation,
                              "ensemble: sample_id mismatch at row " + std::to_string(i));
            }
            per_sample[m] = r;
        }
        dense[static_cast<std::size_t>(i)] = ensemble::ensemble_average(per_sample, val.num_classes);
    }
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(val.n) * val.num_classes);
    for (const std::vector<double>& row : dense) flat.insert(flat.end(), row.begin(), row.end());
    std::vector<int> labels(val.labels.begin(), val.labels.end());
    return ensemble::eval_report(flat, val.n, val.num_classes, labels, train_class_counts);
}

namespace {

struct LadderSpec {
    std::string name;
    std::vector<Stage> stages;
    int cleaning_rounds = 0;  // 0: keep configured rounds
};

}  // namespace

LadderResult run_ladder(const ExperimentConfig& cfg, bool quiet) {
    cfg.validate();
    std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);

    using S = Stage;
    std::vector<LadderSpec> rows = {
        {"baseline", {S::train, S::eval}, 0},
        {"+data_cleaning", {S::train, S::clean, S::eval}, 1},
        {"+iterative_cleaning", {S::train, S::clean, S::eval}, 0},
        {"+retrain_classifier", {S::train, S::clean, S::retrain_classifier, S::eval}, 0},
        {"+tau_normalization", {S::train, S::clean, S::retrain_classifier, S::tau_norm, S::eval}, 0},
        {"+tta", {S::train, S::clean, S::retrain_classifier, S::tau_norm, S::tta_eval}, 0},
        {"+highres_finetune",
         {S::train, S::clean, S::highres_finetune, S::retrain_classifier, S::tau_norm, S::tta_eval},
         0},
    };

    LadderResult result;
    std::filesystem::path row7_dir;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ExperimentConfig row_cfg = cfg;
        row_cfg.stages = rows[i].stages;
        if (rows[i].cleaning_rounds > 0) row_cfg.cleaning.rounds = rows[i].cleaning_rounds;
        row_cfg.out_dir = (out_dir / ("row_" + std::to_string(i + 1))).string();
        if (!quiet) std::printf("== ladder row %zu: %s ==\n", i + 1, rows[i].name.c_str());
        RunResult run = run_experiment(row_cfg, quiet);
        if (i + 1 == rows.size()) row7_dir = run.out_dir;
        result.rows.push_back({rows[i].name, run.outcomes.back().report.top1_accuracy, 0.0});
    }

    // Row 8: ensemble of three row-7 pipelines at seeds seed, seed+1, seed+2.
    {
        if (!quiet) std::printf("== ladder row 8: +ensemble_3seed ==\n");
        std::vector<std::filesystem::path> record_files = {row7_dir / "records.jsonl"};
        for (int extra = 1; extra <= 2; ++extra) {
            ExperimentConfig seed_cfg = cfg;
            seed_cfg.stages = rows.back().stages;
            seed_cfg.seed = cfg.seed + static_cast<std::uint64_t>(extra);
            seed_cfg.out_dir =
                (out_dir / ("row_8_seed_" + std::to_string(extra))).string();
            RunResult run = run_experiment(seed_cfg, quiet);
            record_files.push_back(run.records_path);
        }
        synth::GeneratedData pair = synth::gen_dataset(cfg.dataset);
        std::vector<int> counts(pair.train.class_counts.begin(), pair.train.class_counts.end());
        ensemble::EvalReport rep = ensemble_records(record_files, pair.val, counts);
        result.rows.push_back({"+ensemble_3seed", rep.top1_accuracy, 0.0});
    }

    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        result.rows[i].delta = result.rows[i].top1 - result.rows[i - 1].top1;
    }

    std::string csv = "stage,top1,delta\n";
    for (const LadderRow& row : result.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", row.name.c_str(), row.top1, row.delta);
        csv += buf;
    }
    result.csv_path = out_dir / "ladder.csv";
    write_text(result.csv_path, csv);
    return result;
}

}  // namespace tailforge::runner
