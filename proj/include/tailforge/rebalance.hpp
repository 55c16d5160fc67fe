#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tailforge/errors.hpp"
#include "tailforge/trainer.hpp"

namespace tailforge::decouple {

enum class Scope { classifier_only, full_network };

Scope scope_from_string(const std::string& s);
std::string to_string(Scope s);

struct RebalanceConfig {
    double tau = 0.6;  // paper-recommended window 0.5-0.7
    std::vector<double> tau_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    int subset_per_class = 30;
    Scope finetune_scope = Scope::classifier_only;
    int finetune_epochs = 5;

    void validate() const {
        if (tau < 0.0 || tau > 2.0) throw ConfigError("rebalance: tau must be in [0,2]");
        if (subset_per_class < 1) throw ConfigError("rebalance: subset_per_class must be >= 1");
        if (finetune_epochs < 0) throw ConfigError("rebalance: finetune_epochs must be >= 0");
        for (double t : tau_grid) {
            if (t < 0.0 || t > 2.0) throw ConfigError("rebalance: tau_grid entry outside [0,2]");
        }
    }
};

// Row-wise w_i / ||w_i||^tau, computed in double regardless of T. tau = 0
// returns the input bitwise-unchanged.
template <typename T>
std::vector<T> tau_normalize(const std::vector<T>& w, int num_classes, int d, double tau) {
    if (w.size() != static_cast<std::size_t>(num_classes) * d) {
        throw ConfigError("tau_normalize: weight shape mismatch");
    }
    if (tau == 0.0) return w;
    std::vector<T> out(w.size());
    for (int i = 0; i < num_classes; ++i) {
        const T* row = w.data() + static_cast<std::size_t>(i) * d;
        double norm_sq = 0.0;
        for (int j = 0; j < d; ++j) {
            double v = static_cast<double>(row[j]);
            norm_sq += v * v;
        }
        if (norm_sq <= 0.0) {
            throw NumericError("tau_normalize: zero-norm classifier row for class " + std::to_string(i));
        }
        double scale = std::pow(std::sqrt(norm_sq), -tau);
        T* dst = out.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) dst[j] = static_cast<T>(static_cast<double>(row[j]) * scale);
    }
    return out;
}

struct TauPoint {
    double tau = 0.0;
    double mcer = 0.0;
    double top1 = 0.0;
};

struct TauSearchResult {
    double best_tau = 0.0;
    std::vector<TauPoint> curve;  // in grid order
};

// Evaluates the model on val with the classifier tau-normalized at each grid
// point; the minimizer of MCER wins, ties toward smaller tau.
TauSearchResult grid_search_tau(const nn::ModelParams<float>& params, const synth::Dataset& val,
                                const std::vector<double>& grid,
                                const std::vector<int>& train_class_counts);

void write_tau_curve_csv(const TauSearchResult& result, const std::filesystem::path& path);

// Classifier retraining on the frozen backbone (cRT). Features are extracted
// once in eval mode (BN running stats), then only classifier_w trains, with
// class-balanced index streams. reinit = true redraws rows from normal(0,0.01).
nn::ModelParams<float> retrain_classifier(const nn::ModelParams<float>& params,
                                          const synth::Dataset& data, const train::TrainView& view,
                                          const train::TrainerConfig& tcfg, int epochs, bool reinit,
                                          std::uint64_t seed);

// Top-m per class by the model's probability for the sample's own label
// (descending, ties toward lower index); survivors only.
std::vector<int> build_balanced_subset(const train::TrainView& view, const std::vector<double>& probs,
                                       int num_classes, int m);

// Finetunes on the subset with IBS. classifier_only keeps the backbone frozen
// bitwise (feature-space training); full_network warm-starts everything.
nn::ModelParams<float> finetune_on_subset(const nn::ModelParams<float>& params,
                                          const synth::Dataset& data, const train::TrainView& view,
                                          const std::vector<int>& subset, Scope scope,
                                          const train::TrainerConfig& tcfg, int epochs,
                                          std::uint64_t seed);

}  // namespace tailforge::decouple
