#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tailforge/ensemble.hpp"
#include "tailforge/trainer.hpp"

namespace tailforge::cleanse {

enum class Rule { drop_mismatch_lowconf, drop_lowlabelprob };
enum class ThresholdMode { absolute, quantile };

Rule rule_from_string(const std::string& s);
std::string to_string(Rule r);
ThresholdMode threshold_mode_from_string(const std::string& s);
std::string to_string(ThresholdMode m);

struct CleaningConfig {
    int rounds = 3;  // paper window 3-4
    Rule rule = Rule::drop_mismatch_lowconf;
    double conf_threshold = 0.5;  // theta; the quantile q in quantile mode
    ThresholdMode threshold_mode = ThresholdMode::absolute;
    bool relabel_enabled = false;
    double relabel_threshold = 0.9;  // theta_hi
    int retrain_epochs_per_round = 0;  // 0: full base schedule each round
    int topk = 10;

    void validate() const {
        if (rounds < 1) throw ConfigError("cleaning: rounds must be >= 1");
        if (conf_threshold <= 0.0 || conf_threshold >= 1.0) {
            throw ConfigError("cleaning: conf_threshold must be in (0,1)");
        }
        if (relabel_enabled && relabel_threshold < conf_threshold) {
            throw ConfigError("cleaning: relabel_threshold must be >= conf_threshold");
        }
        if (relabel_threshold <= 0.0 || relabel_threshold >= 1.0) {
            throw ConfigError("cleaning: relabel_threshold must be in (0,1)");
        }
        if (retrain_epochs_per_round < 0) throw ConfigError("cleaning: retrain epochs must be >= 0");
        if (topk < 1) throw ConfigError("cleaning: topk must be >= 1");
    }
};

struct CleaningRound {
    int round = 0;           // 1-based
    int kept = 0;            // survivors after this round's apply
    int dropped = 0;
    int relabeled = 0;
    int relabeled_correct = 0;  // relabels matching the true label (oracle)
    double oracle_precision = 0.0;
    double oracle_recall = 0.0;
    double threshold_used = 0.0;
    double post_retrain_val_top1 = 0.0;
};

struct CleaningHistory {
    std::vector<CleaningRound> rounds;
    std::vector<int> final_indices;
    std::map<int, int> final_relabels;              // dataset position -> new label
    std::vector<std::vector<std::uint8_t>> drop_masks;  // per round, full dataset length
};

// Eval-mode top-k records for the given dataset positions (sample_id = dataset
// position).
std::vector<ensemble::PredictionRecord> score_training_set(const nn::ModelParams<float>& params,
                                                           const synth::Dataset& data,
                                                           const std::vector<int>& positions, int k);

struct Selection {
    std::vector<std::uint8_t> drop;  // aligned with the scored records
    std::map<std::size_t, int> relabel;  // record index -> new label
    double threshold_used = 0.0;
};

// Applies the configured drop/relabel rule. Samples whose top-1 prediction
// agrees with their label are never touched.
Selection select_noisy(const std::vector<ensemble::PredictionRecord>& records,
                       const std::vector<int>& labels, const CleaningConfig& cfg);

struct HistogramRow {
    double bin_low = 0.0;
    double bin_high = 0.0;
    long agree = 0;
    long disagree = 0;
};

std::vector<HistogramRow> confidence_histogram(const std::vector<ensemble::PredictionRecord>& records,
                                               const std::vector<int>& labels, int bins);
void write_histogram_csv(const std::vector<HistogramRow>& rows, const std::filesystem::path& path);

struct CleanResult {
    train::TrainView view;
    CleaningHistory history;
    nn::ModelParams<float> model;  // trained on the final cleaned set
};

// Round r: score with the current model, select, apply drops/relabels, retrain
// from scratch on the survivors, evaluate. The entering model (or a fresh
// from-scratch run when absent) supplies round 1's scoring pass.
CleanResult iterative_clean(const synth::Dataset& data, const synth::Dataset& val,
                            const train::TrainerConfig& tcfg, const CleaningConfig& ccfg,
                            std::uint64_t seed, const nn::ModelParams<float>* entering);

// history.json + per-round drop masks (round_<r>_drop.u8).
void write_history(const CleaningHistory& history, const std::filesystem::path& dir);

}  // namespace tailforge::cleanse
