#include "tailforge/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "tailforge/util.hpp"

namespace tailforge::runner {

using nlohmann::json;

Stage stage_from_string(const std::string& s) {
    if (s == "train") return Stage::train;
    if (s == "clean") return Stage::clean;
    if (s == "retrain_classifier") return Stage::retrain_classifier;
    if (s == "subset_finetune") return Stage::subset_finetune;
    if (s == "highres_finetune") return Stage::highres_finetune;
    if (s == "tau_norm") return Stage::tau_norm;
    if (s == "tta_eval") return Stage::tta_eval;
    if (s == "eval") return Stage::eval;
    throw ConfigError("unknown stage: " + s);
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::train: return "train";
        case Stage::clean: return "clean";
        case Stage::retrain_classifier: return "retrain_classifier";
        case Stage::subset_finetune: return "subset_finetune";
        case Stage::highres_finetune: return "highres_finetune";
        case Stage::tau_norm: return "tau_norm";
        case Stage::tta_eval: return "tta_eval";
        case Stage::eval: return "eval";
    }
    throw ConfigError("invalid stage value");
}

namespace {

void check_keys(const json& obj, const std::string& ctx, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: '" + ctx + "' must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("config: unknown key '" + key + "' in " + ctx);
        }
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& ctx) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + std::string(key) + "' in " + ctx + ": " + e.what());
    }
}

void read_string_field(const json& obj, const char* key, const std::string& ctx,
                       const std::function<void(const std::string&)>& apply) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_string()) {
        throw ConfigError("config: '" + std::string(key) + "' in " + ctx + " must be a string");
    }
    apply(obj.at(key).get<std::string>());
}

void parse_dataset(const json& obj, synth::DatasetSpec& d) {
    check_keys(obj, "dataset",
               {"num_classes", "max_count", "imbalance_ratio", "profile", "base_resolution",
                "noise_rate", "noise_mode", "seed", "val_per_class"});
    read_field(obj, "num_classes", d.num_classes, "dataset");
    read_field(obj, "max_count", d.max_count, "dataset");
    read_field(obj, "imbalance_ratio", d.imbalance_ratio, "dataset");
    read_string_field(obj, "profile", "dataset",
                      [&](const std::string& s) { d.profile = synth::profile_from_string(s); });
    read_field(obj, "base_resolution", d.base_resolution, "dataset");
    read_field(obj, "noise_rate", d.noise_rate, "dataset");
    read_string_field(obj, "noise_mode", "dataset",
                      [&](const std::string& s) { d.noise_mode = synth::noise_mode_from_string(s); });
    read_field(obj, "seed", d.seed, "dataset");
    read_field(obj, "val_per_class", d.val_per_class, "dataset");
}

void parse_optim(const json& obj, nn::OptimConfig& o) {
    check_keys(obj, "optim",
               {"base_lr_per_256", "batch_size", "momentum", "weight_decay", "warmup_epochs",
                "decay_epochs", "decay_ratio", "total_epochs"});
    read_field(obj, "base_lr_per_256", o.base_lr_per_256, "optim");
    read_field(obj, "batch_size", o.batch_size, "optim");
    read_field(obj, "momentum", o.momentum, "optim");
    read_field(obj, "weight_decay", o.weight_decay, "optim");
    read_field(obj, "warmup_epochs", o.warmup_epochs, "optim");
    read_field(obj, "decay_epochs", o.decay_epochs, "optim");
    read_field(obj, "decay_ratio", o.decay_ratio, "optim");
    read_field(obj, "total_epochs", o.total_epochs, "optim");
}

void parse_sampler(const json& obj, SamplerKind& s) {
    check_keys(obj, "sampler", {"kind", "epoch_size"});
    read_string_field(obj, "kind", "sampler", [&](const std::string& v) {
        if (v == "IBS") {
            s.kind = sampling::Scheme::instance_balanced;
        } else if (v == "CBS") {
            s.kind = sampling::Scheme::class_balanced;
        } else {
            throw ConfigError("config: sampler.kind must be IBS or CBS, got '" + v + "'");
        }
    });
    read_field(obj, "epoch_size", s.epoch_size, "sampler");
}

void parse_augment(const json& obj, img::AugmentConfig& a, bool& enabled) {
    check_keys(obj, "augment",
               {"enabled", "pad_then_crop", "hflip_prob", "vflip_prob", "brightness_delta",
                "contrast_range", "dropout_holes", "dropout_size"});
    read_field(obj, "enabled", enabled, "augment");
    read_field(obj, "pad_then_crop", a.pad_then_crop, "augment");
    read_field(obj, "hflip_prob", a.hflip_prob, "augment");
    read_field(obj, "vflip_prob", a.vflip_prob, "augment");
    read_field(obj, "brightness_delta", a.brightness_delta, "augment");
    read_field(obj, "contrast_range", a.contrast_range, "augment");
    read_field(obj, "dropout_holes", a.dropout_holes, "augment");
    read_field(obj, "dropout_size", a.dropout_size, "augment");
}

void parse_cleaning(const json& obj, cleanse::CleaningConfig& c) {
    check_keys(obj, "cleaning",
               {"rounds", "rule", "conf_threshold", "threshold_mode", "relabel_enabled",
                "relabel_threshold", "retrain_epochs_per_round"});
    read_field(obj, "rounds", c.rounds, "cleaning");
    read_string_field(obj, "rule", "cleaning",
                      [&](const std::string& s) { c.rule = cleanse::rule_from_string(s); });
    read_field(obj, "conf_threshold", c.conf_threshold, "cleaning");
    read_string_field(obj, "threshold_mode", "cleaning", [&](const std::string& s) {
        c.threshold_mode = cleanse::threshold_mode_from_string(s);
    });
    read_field(obj, "relabel_enabled", c.relabel_enabled, "cleaning");
    read_field(obj, "relabel_threshold", c.relabel_threshold, "cleaning");
    read_field(obj, "retrain_epochs_per_round", c.retrain_epochs_per_round, "cleaning");
}

void parse_rebalance(const json& obj, decouple::RebalanceConfig& r) {
    check_keys(obj, "rebalance",
               {"tau", "tau_grid", "subset_per_class", "finetune_scope", "finetune_epochs"});
    read_field(obj, "tau", r.tau, "rebalance");
    read_field(obj, "tau_grid", r.tau_grid, "rebalance");
    read_field(obj, "subset_per_class", r.subset_per_class, "rebalance");
    read_string_field(obj, "finetune_scope", "rebalance",
                      [&](const std::string& s) { r.finetune_scope = decouple::scope_from_string(s); });
    read_field(obj, "finetune_epochs", r.finetune_epochs, "rebalance");
}

void parse_tta(const json& obj, img::TtaConfig& t) {
    check_keys(obj, "tta", {"train_res", "enlarge_factor", "crops", "average_space"});
    read_field(obj, "train_res", t.train_res, "tta");
    read_field(obj, "enlarge_factor", t.enlarge_factor, "tta");
    read_string_field(obj, "crops", "tta",
                      [&](const std::string& s) { t.crops = img::crop_mode_from_string(s); });
    read_string_field(obj, "average_space", "tta",
                      [&](const std::string& s) { t.average_space = img::average_space_from_string(s); });
}

void parse_model(const json& obj, nn::ArchConfig& m) {
    check_keys(obj, "model", {"channels", "d_emb"});
    read_field(obj, "channels", m.channels, "model");
    read_field(obj, "d_emb", m.d_emb, "model");
}

void parse_loss(const json& obj, LossConfig& l) {
    check_keys(obj, "loss", {"label_smoothing", "mixup_alpha"});
    read_field(obj, "label_smoothing", l.label_smoothing, "loss");
    read_field(obj, "mixup_alpha", l.mixup_alpha, "loss");
}

void parse_highres(const json& obj, HighresConfig& h) {
    check_keys(obj, "highres", {"resolution", "epochs"});
    read_field(obj, "resolution", h.resolution, "highres");
    read_field(obj, "epochs", h.epochs, "highres");
}

}  // namespace

int ExperimentConfig::highres_resolution() const {
    if (highres.resolution > 0) return highres.resolution;
    return static_cast<int>(std::lround(1.5 * dataset.base_resolution));
}

train::TrainerConfig ExperimentConfig::trainer_config() const {
    train::TrainerConfig t;
    t.arch = model;
    t.optim = optim;
    t.scheme = sampler.kind;
    t.cbs_epoch_size = sampler.epoch_size;
    t.augment = augment;
    t.augment_enabled = augment_enabled;
    t.label_smoothing = loss.label_smoothing;
    t.mixup_alpha = loss.mixup_alpha;
    return t;
}

void ExperimentConfig::validate() const {
    if (stages.empty()) throw ConfigError("config: stage list must be non-empty");
    if (stages.front() != Stage::train) {
        throw ConfigError("config: stage-order violation: '" + to_string(stages.front()) +
                          "' before 'train' (the pipeline must start with train)");
    }
    for (std::size_t i = 1; i < stages.size(); ++i) {
        if (stages[i] == Stage::train) {
            throw ConfigError("config: stage-order violation: 'train' after '" +
                              to_string(stages[i - 1]) + "' (train must be the first stage only)");
        }
    }
    // Further training would overwrite the normalized classifier.
    bool tau_seen = false;
    for (Stage s : stages) {
        if (s == Stage::tau_norm) tau_seen = true;
        bool trains = s == Stage::clean || s == Stage::retrain_classifier ||
                      s == Stage::subset_finetune || s == Stage::highres_finetune;
        if (tau_seen && trains) {
            throw ConfigError("config: stage-order violation: '" + to_string(s) +
                              "' after 'tau_norm' (training stages must precede tau_norm)");
        }
    }
    if (ensemble_k < 1) throw ConfigError("config: ensemble_k must be >= 1");
    if (dataset.num_classes < 2) throw ConfigError("config: dataset.num_classes must be >= 2");
    if (highres.epochs < 0) throw ConfigError("config: highres.epochs must be >= 0");
    if (highres.resolution != 0 && highres.resolution < 8) {
        throw ConfigError("config: highres.resolution must be 0 (auto) or >= 8");
    }
    optim.validate();
    cleaning.validate();
    rebalance.validate();
    if (tta.train_res != 0) tta.validate();
    if (tta.train_res == 0) {
        img::TtaConfig probe = tta;
        probe.train_res = dataset.base_resolution;
        probe.validate();
    }
    if (loss.label_smoothing < 0.0 || loss.label_smoothing >= 1.0) {
        throw ConfigError("config: loss.label_smoothing must be in [0,1)");
    }
    if (loss.mixup_alpha < 0.0) throw ConfigError("config: loss.mixup_alpha must be >= 0");
}

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc, "config root",
               {"dataset", "optim", "sampler", "augment", "cleaning", "rebalance", "tta", "model",
                "loss", "highres", "ensemble_k", "stages", "seed", "out_dir"});
    ExperimentConfig cfg;
    if (doc.contains("dataset")) parse_dataset(doc.at("dataset"), cfg.dataset);
    if (doc.contains("optim")) parse_optim(doc.at("optim"), cfg.optim);
    if (doc.contains("sampler")) parse_sampler(doc.at("sampler"), cfg.sampler);
    if (doc.contains("augment")) parse_augment(doc.at("augment"), cfg.augment, cfg.augment_enabled);
    if (doc.contains("cleaning")) parse_cleaning(doc.at("cleaning"), cfg.cleaning);
    if (doc.contains("rebalance")) parse_rebalance(doc.at("rebalance"), cfg.rebalance);
    if (doc.contains("tta")) parse_tta(doc.at("tta"), cfg.tta);
    if (doc.contains("model")) parse_model(doc.at("model"), cfg.model);
    if (doc.contains("loss")) parse_loss(doc.at("loss"), cfg.loss);
    if (doc.contains("highres")) parse_highres(doc.at("highres"), cfg.highres);
    read_field(doc, "ensemble_k", cfg.ensemble_k, "config root");
    if (doc.contains("stages")) {
        if (!doc.at("stages").is_array()) throw ConfigError("config: 'stages' must be an array");
        cfg.stages.clear();
        for (const json& s : doc.at("stages")) {
            if (!s.is_string()) throw ConfigError("config: stage entries must be strings");
            cfg.stages.push_back(stage_from_string(s.get<std::string>()));
        }
    }
    read_field(doc, "seed", cfg.seed, "config root");
    read_field(doc, "out_dir", cfg.out_dir, "config root");
    cfg.cleaning.topk = cfg.ensemble_k;  // cleaning scores use the ensemble's k
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError& e) {
        // An unreadable --config path is a configuration error (exit code 2).
        throw ConfigError(std::string("config file: ") + e.what());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

json resolved_config(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = {{"num_classes", cfg.dataset.num_classes},
                    {"max_count", cfg.dataset.max_count},
                    {"imbalance_ratio", cfg.dataset.imbalance_ratio},
                    {"profile", synth::to_string(cfg.dataset.profile)},
                    {"base_resolution", cfg.dataset.base_resolution},
                    {"noise_rate", cfg.dataset.noise_rate},
                    {"noise_mode", synth::to_string(cfg.dataset.noise_mode)},
                    {"seed", cfg.dataset.seed},
                    {"val_per_class", cfg.dataset.val_per_class}};
    j["optim"] = {{"base_lr_per_256", cfg.optim.base_lr_per_256},
                  {"batch_size", cfg.optim.batch_size},
                  {"momentum", cfg.optim.momentum},
                  {"weight_decay", cfg.optim.weight_decay},
                  {"warmup_epochs", cfg.optim.warmup_epochs},
                  {"decay_epochs", cfg.optim.decay_epochs},
                  {"decay_ratio", cfg.optim.decay_ratio},
                  {"total_epochs", cfg.optim.total_epochs}};
    j["sampler"] = {{"kind", cfg.sampler.kind == sampling::Scheme::class_balanced ? "CBS" : "IBS"},
                    {"epoch_size", cfg.sampler.epoch_size}};
    j["augment"] = {{"enabled", cfg.augment_enabled},
                    {"pad_then_crop", cfg.augment.pad_then_crop},
                    {"hflip_prob", cfg.augment.hflip_prob},
                    {"vflip_prob", cfg.augment.vflip_prob},
                    {"brightness_delta", cfg.augment.brightness_delta},
                    {"contrast_range", cfg.augment.contrast_range},
                    {"dropout_holes", cfg.augment.dropout_holes},
                    {"dropout_size", cfg.augment.dropout_size}};
    j["cleaning"] = {{"rounds", cfg.cleaning.rounds},
                     {"rule", cleanse::to_string(cfg.cleaning.rule)},
                     {"conf_threshold", cfg.cleaning.conf_threshold},
                     {"threshold_mode", cleanse::to_string(cfg.cleaning.threshold_mode)},
                     {"relabel_enabled", cfg.cleaning.relabel_enabled},
                     {"relabel_threshold", cfg.cleaning.relabel_threshold},
                     {"retrain_epochs_per_round", cfg.cleaning.retrain_epochs_per_round}};
    j["rebalance"] = {{"tau", cfg.rebalance.tau},
                      {"tau_grid", cfg.rebalance.tau_grid},
                      {"subset_per_class", cfg.rebalance.subset_per_class},
                      {"finetune_scope", decouple::to_string(cfg.rebalance.finetune_scope)},
                      {"finetune_epochs", cfg.rebalance.finetune_epochs}};
    j["tta"] = {{"train_res", cfg.tta.train_res},
                {"enlarge_factor", cfg.tta.enlarge_factor},
                {"crops", img::to_string(cfg.tta.crops)},
                {"average_space", img::to_string(cfg.tta.average_space)}};
    j["model"] = {{"channels", cfg.model.channels}, {"d_emb", cfg.model.d_emb}};
    j["loss"] = {{"label_smoothing", cfg.loss.label_smoothing}, {"mixup_alpha", cfg.loss.mixup_alpha}};
    j["highres"] = {{"resolution", cfg.highres.resolution}, {"epochs", cfg.highres.epochs}};
    j["ensemble_k"] = cfg.ensemble_k;
    json stages = json::array();
    for (Stage s : cfg.stages) stages.push_back(to_string(s));
    j["stages"] = std::move(stages);
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::string canon = resolved_config(cfg).dump();
    return hex64(fnv1a64(reinterpret_cast<const std::uint8_t*>(canon.data()), canon.size()));
}

}  // namespace tailforge::runner
