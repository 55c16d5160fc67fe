#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailforge/config.hpp"

namespace tailforge::runner {

struct StageOutcome {
    Stage stage;
    ensemble::EvalReport report;
    double wall_seconds = 0.0;
};

struct RunResult {
    nlohmann::json manifest;  // deterministic (no timings)
    std::vector<StageOutcome> outcomes;
    std::filesystem::path out_dir;
    nn::ModelParams<float> model;
    std::filesystem::path records_path;  // last emitted prediction records
};

// Executes the stage list, evaluating on the validation set after every stage
// and writing manifest.json / timing.json plus all stage artifacts under
// cfg.out_dir. `quiet` suppresses progress lines on stdout.
RunResult run_experiment(const ExperimentConfig& cfg, bool quiet);

struct LadderRow {
    std::string name;
    double top1 = 0.0;
    double delta = 0.0;
};

struct LadderResult {
    std::vector<LadderRow> rows;
    std::filesystem::path csv_path;
};

// Cumulative ablation ladder: baseline, +data cleaning, +iterative cleaning,
// +retrain classifier, +tau normalization, +TTA, +highres finetune, +3-seed
// ensemble. Writes ladder.csv (stage,top1,delta) under cfg.out_dir.
LadderResult run_ladder(const ExperimentConfig& cfg, bool quiet);

// Averages prediction records from several runs over the same validation set.
ensemble::EvalReport ensemble_records(const std::vector<std::filesystem::path>& record_files,
                                      const synth::Dataset& val,
                                      const std::vector<int>& train_class_counts);

}  // namespace tailforge::runner
