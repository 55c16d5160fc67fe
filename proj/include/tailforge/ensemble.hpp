#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "tailforge/errors.hpp"

namespace tailforge::ensemble {

// Truncated per-sample prediction: up to k (class, prob) pairs, probabilities
// descending, ties broken by lower class index, zero-probability entries
// dropped.
struct PredictionRecord {
    int sample_id = 0;
    std::vector<std::pair<int, double>> top;
};

struct EvalReport {
    double mean_class_error_rate = 0.0;
    double top1_accuracy = 0.0;
    double top5_accuracy = 0.0;
    std::vector<double> per_class_accuracy;  // 0 for classes absent from labels
    std::vector<bool> class_present;
    std::vector<int> class_split;  // 0 head, 1 medium, 2 tail
    std::array<double, 3> split_accuracy{0.0, 0.0, 0.0};
};

// Index of the largest entry; ties go to the lower index.
int argmax_class(const double* probs, int num_classes);

PredictionRecord truncate_topk(const double* probs, int num_classes, int k, int sample_id);

// Uniform probability averaging over models; classes absent from a model's
// top-k contribute zero. Result renormalized to sum 1.
std::vector<double> ensemble_average(const std::vector<PredictionRecord>& records, int num_classes);

double mean_class_error_rate(const std::vector<int>& predictions, const std::vector<int>& labels,
                             int num_classes);

// Head/medium/tail split ids per class: classes ranked by descending training
// count, terciles in rank order, count ties pulled into the headier split.
std::vector<int> class_splits(const std::vector<int>& class_counts);

EvalReport eval_report(const std::vector<double>& probs, int n, int num_classes,
                       const std::vector<int>& labels, const std::vector<int>& class_counts);

// Evaluation via per-sample records (e.g. after ensembling): each record is
// expanded to a dense C-vector through ensemble_average with M = 1.
EvalReport eval_report_records(const std::vector<PredictionRecord>& records, int num_classes,
                               const std::vector<int>& labels, const std::vector<int>& class_counts);

// JSON Lines: {"id": int, "top": [[class, prob], ...]} per line.
void write_records(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);
std::vector<PredictionRecord> read_records(const std::filesystem::path& path);

// EvalReport serialization: summary JSON and per-class CSV
// (class,count,accuracy,split).
void write_report(const EvalReport& report, const std::vector<int>& class_counts,
                  const std::filesystem::path& json_path, const std::filesystem::path& csv_path);

}  // namespace tailforge::ensemble
