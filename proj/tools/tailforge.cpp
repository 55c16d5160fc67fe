// tailforge — long-tailed noisy-label training laboratory.
//
// Subcommands: gen, train, clean, rebalance, tau, tta-eval, eval, ensemble,
// ladder. Every pipeline subcommand is self-contained and deterministic:
// (config, seed) fully determine the results, independent of TAILFORGE_THREADS.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tailforge/experiment.hpp"
#include "tailforge/threads.hpp"
#include "tailforge/util.hpp"

namespace fs = std::filesystem;
using namespace tailforge;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "Experiment config (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "Override the config seed");
    cmd->add_option("--out", args.out, "Override the config output directory");
    cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
}

runner::ExperimentConfig load(const CommonArgs& args) {
    runner::ExperimentConfig cfg = runner::load_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.out) cfg.out_dir = *args.out;
    return cfg;
}

// Fixed pipelines behind the single-purpose subcommands. `train` alone honors
// the config's stage list, making it the generic runner.
void run_with_stages(const CommonArgs& args, std::optional<std::vector<runner::Stage>> stages) {
    runner::ExperimentConfig cfg = load(args);
    if (stages) cfg.stages = std::move(*stages);
    runner::RunResult res = runner::run_experiment(cfg, args.quiet);
    if (!args.quiet) {
        std::printf("run complete: %s\n", res.out_dir.string().c_str());
    }
}

void cmd_gen(const CommonArgs& args) {
    runner::ExperimentConfig cfg = load(args);
    fs::path out(cfg.out_dir);
    synth::GeneratedData pair = synth::gen_dataset(cfg.dataset);
    synth::write_dataset(pair.train, out / "train");
    synth::write_dataset(pair.val, out / "val");
    nlohmann::json manifest;
    manifest["train_samples"] = pair.train.n;
    manifest["val_samples"] = pair.val.n;
    manifest["num_classes"] = pair.train.num_classes;
    manifest["flipped"] = [&] {
        long f = 0;
        for (std::uint8_t m : pair.train.flip_mask) f += m;
        return f;
    }();
    manifest["config_hash"] = runner::config_hash(cfg);
    write_text(out / "gen_manifest.json", manifest.dump(2) + "\n");
    if (!args.quiet) {
        std::printf("wrote %d train / %d val samples to %s\n", pair.train.n, pair.val.n,
                    out.string().c_str());
    }
}

// Evaluates a saved checkpoint on the config's validation split. `tta` selects
// the FixRes ten-crop path; otherwise plain eval at the base resolution.
void cmd_eval_checkpoint(const CommonArgs& args, const std::string& model_dir, bool tta) {
    runner::ExperimentConfig cfg = load(args);
    fs::path ckpt(model_dir);
    if (fs::exists(ckpt / "checkpoint" / "manifest.json")) ckpt /= "checkpoint";
    nn::ModelParams<float> model = nn::load_checkpoint(ckpt);

    synth::GeneratedData pair = synth::gen_dataset(cfg.dataset);
    std::vector<int> counts(pair.train.class_counts.begin(), pair.train.class_counts.end());
    std::vector<int> labels(pair.val.labels.begin(), pair.val.labels.end());

    std::vector<double> probs;
    if (tta) {
        img::TtaConfig tcfg = cfg.tta;
        if (tcfg.train_res == 0) tcfg.train_res = pair.val.h;
        probs = img::fixres_tta_predict_all(model, pair.val.images.data(), pair.val.n, pair.val.h,
                                            pair.val.w, tcfg);
    } else {
        probs = train::score_dataset(model, pair.val);
    }
    ensemble::EvalReport report =
        ensemble::eval_report(probs, pair.val.n, pair.val.num_classes, labels, counts);

    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    std::vector<ensemble::PredictionRecord> records(static_cast<std::size_t>(pair.val.n));
    for (int i = 0; i < pair.val.n; ++i) {
        records[static_cast<std::size_t>(i)] = ensemble::truncate_topk(
            probs.data() + static_cast<std::size_t>(i) * pair.val.num_classes, pair.val.num_classes,
            cfg.ensemble_k, i);
    }
    ensemble::write_records(records, out / "records.jsonl");
    ensemble::write_report(report, counts, out / "report.json", out / "report_per_class.csv");
    if (!args.quiet) {
        std::printf("top1=%.4f top5=%.4f mcer=%.4f\n", report.top1_accuracy, report.top5_accuracy,
                    report.mean_class_error_rate);
    }
}

void cmd_ensemble(const CommonArgs& args, const std::vector<std::string>& runs) {
    runner::ExperimentConfig cfg = load(args);
    std::vector<fs::path> record_files;
    for (const std::string& r : runs) {
        fs::path p(r);
        if (fs::is_directory(p)) p /= "records.jsonl";
        record_files.push_back(p);
    }
    synth::GeneratedData pair = synth::gen_dataset(cfg.dataset);
    std::vector<int> counts(pair.train.class_counts.begin(), pair.train.class_counts.end());
    ensemble::EvalReport report = runner::ensemble_records(record_files, pair.val, counts);
    fs::path out(cfg.out_dir);
    fs::create_directories(out);
    ensemble::write_report(report, counts, out / "report.json", out / "report_per_class.csv");
    if (!args.quiet) {
        std::printf("ensemble of %zu runs: top1=%.4f mcer=%.4f\n", record_files.size(),
                    report.top1_accuracy, report.mean_class_error_rate);
    }
}

void cmd_ladder(const CommonArgs& args) {
    runner::ExperimentConfig cfg = load(args);
    runner::LadderResult ladder = runner::run_ladder(cfg, args.quiet);
    if (!args.quiet) {
        std::printf("%-22s %8s %8s\n", "stage", "top1", "delta");
        for (const runner::LadderRow& row : ladder.rows) {
            std::printf("%-22s %8.4f %+8.4f\n", row.name.c_str(), row.top1, row.delta);
        }
        std::printf("wrote %s\n", ladder.csv_path.string().c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"tailforge: long-tailed noisy-label training laboratory"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, clean_args, rebal_args, tau_args, tta_args, eval_args,
        ens_args, ladder_args;
    std::string eval_model, tta_model;
    std::vector<std::string> ensemble_runs;

    add_common(app.add_subcommand("gen", "Generate the synthetic dataset pair"), gen_args);
    add_common(app.add_subcommand("train", "Run the config's stage pipeline"), train_args);
    add_common(app.add_subcommand("clean", "Train, iteratively clean, evaluate"), clean_args);
    add_common(app.add_subcommand("rebalance", "Train, retrain the classifier (cRT), evaluate"),
               rebal_args);
    add_common(app.add_subcommand("tau", "Train, tau-normalize the classifier, evaluate"), tau_args);
    auto* tta_cmd = app.add_subcommand("tta-eval", "FixRes ten-crop evaluation");
    add_common(tta_cmd, tta_args);
    tta_cmd->add_option("--model", tta_model, "Checkpoint (or run directory) to evaluate");
    auto* eval_cmd = app.add_subcommand("eval", "Plain evaluation");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--model", eval_model, "Checkpoint (or run directory) to evaluate");
    auto* ens_cmd = app.add_subcommand("ensemble", "Average prediction records from several runs");
    add_common(ens_cmd, ens_args);
    ens_cmd->add_option("runs", ensemble_runs, "Run directories (or records.jsonl files)")
        ->required()
        ->expected(2, -1);
    add_common(app.add_subcommand("ladder", "Run the cumulative ablation ladder"), ladder_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // bad flags are config errors
    }

    using S = runner::Stage;
    try {
        if (app.got_subcommand("gen")) {
            cmd_gen(gen_args);
        } else if (app.got_subcommand("train")) {
            run_with_stages(train_args, std::nullopt);
        } else if (app.got_subcommand("clean")) {
            run_with_stages(clean_args, std::vector<S>{S::train, S::clean, S::eval});
        } else if (app.got_subcommand("rebalance")) {
            run_with_stages(rebal_args, std::vector<S>{S::train, S::retrain_classifier, S::eval});
        } else if (app.got_subcommand("tau")) {
            run_with_stages(tau_args, std::vector<S>{S::train, S::tau_norm, S::eval});
        } else if (app.got_subcommand("tta-eval")) {
            if (!tta_model.empty()) {
                cmd_eval_checkpoint(tta_args, tta_model, true);
            } else {
                run_with_stages(tta_args, std::vector<S>{S::train, S::tta_eval});
            }
        } else if (app.got_subcommand("eval")) {
            if (!eval_model.empty()) {
                cmd_eval_checkpoint(eval_args, eval_model, false);
            } else {
                run_with_stages(eval_args, std::vector<S>{S::train, S::eval});
            }
        } else if (app.got_subcommand("ensemble")) {
            cmd_ensemble(ens_args, ensemble_runs);
        } else if (app.got_subcommand("ladder")) {
            cmd_ladder(ladder_args);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
