#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailforge/cleaning.hpp"
#include "tailforge/dataset.hpp"
#include "tailforge/rebalance.hpp"
#include "tailforge/sampler.hpp"
#include "tailforge/trainer.hpp"
#include "tailforge/tta.hpp"

namespace tailforge::runner {

enum class Stage {
    train,
    clean,
    retrain_classifier,
    subset_finetune,
    highres_finetune,
    tau_norm,
    tta_eval,
    eval,
};

Stage stage_from_string(const std::string& s);
std::string to_string(Stage s);

struct SamplerKind {
    sampling::Scheme kind = sampling::Scheme::instance_balanced;
    int epoch_size = 0;  // CBS only; 0 means the survivor count
};

struct HighresConfig {
    int resolution = 0;  // 0: round(1.5 * dataset.base_resolution)
    int epochs = 5;
};

struct LossConfig {
    double label_smoothing = 0.1;
    double mixup_alpha = 0.0;
};

struct ExperimentConfig {
    synth::DatasetSpec dataset;
    nn::OptimConfig optim;
    SamplerKind sampler;
    img::AugmentConfig augment;
    bool augment_enabled = true;
    cleanse::CleaningConfig cleaning;
    decouple::RebalanceConfig rebalance;
    img::TtaConfig tta;           // train_res 0 resolves to the operating resolution
    nn::ArchConfig model;
    LossConfig loss;
    HighresConfig highres;
    int ensemble_k = 10;
    std::vector<Stage> stages{Stage::train, Stage::eval};
    std::uint64_t seed = 0;
    std::string out_dir = "run";

    int highres_resolution() const;
    train::TrainerConfig trainer_config() const;
    void validate() const;  // includes the stage-order rules
};

// Strict parsing: unknown keys anywhere are a ConfigError; every missing key
// keeps its default.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// All defaults materialized; dump of this json is the hashing canonical form.
nlohmann::json resolved_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace tailforge::runner
