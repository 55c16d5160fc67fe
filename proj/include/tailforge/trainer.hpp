#pragma once

#include <cstdint>
#include <vector>

#include "tailforge/dataset.hpp"
#include "tailforge/ensemble.hpp"
#include "tailforge/imageops.hpp"
#include "tailforge/model.hpp"
#include "tailforge/optimizer.hpp"
#include "tailforge/sampler.hpp"

namespace tailforge::train {

// Soft view over a dataset: surviving positions plus effective labels
// (relabeling rewrites `labels`, never the dataset itself).
struct TrainView {
    std::vector<int> indices;  // surviving dataset positions, ascending
    std::vector<int> labels;   // effective label per dataset position (full length n)
};

TrainView full_view(const synth::Dataset& data);

// Labels of the surviving positions, aligned with view.indices.
std::vector<int> view_labels(const TrainView& view);

// Class counts over the survivors.
std::vector<int> view_class_counts(const TrainView& view, int num_classes);

struct TrainerConfig {
    nn::ArchConfig arch;
    nn::OptimConfig optim;
    sampling::Scheme scheme = sampling::Scheme::instance_balanced;
    int cbs_epoch_size = 0;  // 0: use the survivor count
    img::AugmentConfig augment;
    bool augment_enabled = true;
    double label_smoothing = 0.1;
    double mixup_alpha = 0.0;  // 0 disables mixup
};

struct TrainResult {
    nn::ModelParams<float> params;
    std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// From-scratch training on the view (init seeded from `seed`).
TrainResult train_model(const synth::Dataset& data, const TrainView& view, const TrainerConfig& cfg,
                        std::uint64_t seed);

// Warm-start full-network finetuning for `epochs` epochs; the base schedule is
// rescaled onto the short run.
TrainResult finetune_full(const nn::ModelParams<float>& start, const synth::Dataset& data,
                          const TrainView& view, const TrainerConfig& cfg, int epochs,
                          std::uint64_t seed);

// Eval-mode scoring of every image in `data`.
std::vector<double> score_dataset(const nn::ModelParams<float>& params, const synth::Dataset& data);

// Validation report; tercile splits come from the training-set class counts.
ensemble::EvalReport evaluate_model(const nn::ModelParams<float>& params, const synth::Dataset& val,
                                    const std::vector<int>& train_class_counts);

// Eval-mode embeddings (post-BNNeck) for every sample: n x d_emb. Used by
// classifier-only retraining, where the frozen backbone makes features static.
std::vector<float> extract_features(const nn::ModelParams<float>& params, const synth::Dataset& data);

}  // namespace tailforge::train
