#include "tailforge/trainer.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

namespace tailforge::train {

namespace {

constexpr std::uint64_t kInitKey = 0x74665f696e697400ULL;
constexpr std::uint64_t kEpochKey = 0x74665f65706f6368ULL;
constexpr std::uint64_t kAugKey = 0x74665f61756700ULL;
constexpr std::uint64_t kMixKey = 0x74665f6d697800ULL;

}  // namespace

TrainView full_view(const synth::Dataset& data) {
    TrainView view;
    view.indices.resize(static_cast<std::size_t>(data.n));
    std::iota(view.indices.begin(), view.indices.end(), 0);
    view.labels.resize(static_cast<std::size_t>(data.n));
    for (int i = 0; i < data.n; ++i) {
        view.labels[static_cast<std::size_t>(i)] = static_cast<int>(data.labels[static_cast<std::size_t>(i)]);
    }
    return view;
}

std::vector<int> view_labels(const TrainView& view) {
    std::vector<int> out(view.indices.size());
    for (std::size_t k = 0; k < view.indices.size(); ++k) {
        out[k] = view.labels[static_cast<std::size_t>(view.indices[k])];
    }
    return out;
}

std::vector<int> view_class_counts(const TrainView& view, int num_classes) {
    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    for (int pos : view.indices) {
        int c = view.labels[static_cast<std::size_t>(pos)];
        if (c < 0 || c >= num_classes) throw ConfigError("view_class_counts: label out of range");
        ++counts[static_cast<std::size_t>(c)];
    }
    return counts;
}

namespace {

// Shared inner loop for from-scratch training and warm-start finetuning.
// Batch assembly is serial and keyed per (seed, epoch, slot), so results do
// not depend on thread count.
TrainResult run_training(nn::ModelParams<float> params, const synth::Dataset& data,
                         const TrainView& view, const TrainerConfig& cfg,
                         const nn::OptimConfig& schedule, std::uint64_t seed) {
    schedule.validate();
    if (view.indices.empty()) throw ConfigError("train: empty view");
    const int batch = schedule.batch_size;
    const int n_view = static_cast<int>(view.indices.size());
    const int epoch_len = cfg.scheme == sampling::Scheme::class_balanced && cfg.cbs_epoch_size > 0
                              ? cfg.cbs_epoch_size
                              : n_view;
    const int steps_per_epoch = epoch_len / batch;
    if (steps_per_epoch < 1) {
        throw ConfigError("train: epoch shorter than one batch (need >= " + std::to_string(batch) +
                          " samples, have " + std::to_string(epoch_len) + ")");
    }

    std::vector<std::vector<int>> by_class;
    if (cfg.scheme == sampling::Scheme::class_balanced) {
        by_class = sampling::group_by_class(view_labels(view), params.num_classes);
    }

    nn::OptimState<float> state = nn::make_optim_state(params, steps_per_epoch);
    nn::ForwardCache<float> cache;
    nn::Gradients<float> grads = nn::make_zero_grads(params);
    TrainResult result;

    const std::uint64_t aug_root = derive_seed(seed, kAugKey);
    const std::uint64_t mix_root = derive_seed(seed, kMixKey);
    const std::size_t px = static_cast<std::size_t>(data.h) * data.w;

    nn::Batch<float> b;
    b.b = batch;
    b.h = data.h;
    b.w = data.w;
    b.images.resize(static_cast<std::size_t>(batch) * px);
    b.labels.resize(static_cast<std::size_t>(batch));

    for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(seed, kEpochKey, static_cast<std::uint64_t>(epoch)));
        std::vector<int> order =
            cfg.scheme == sampling::Scheme::class_balanced
                ? sampling::class_balanced_epoch(by_class, epoch_len, epoch_rng)
                : sampling::instance_balanced_epoch(n_view, epoch_rng);

        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            b.has_mix = false;
            b.mix_labels.clear();
            for (int j = 0; j < batch; ++j) {
                int slot = step * batch + j;
                int pos = view.indices[static_cast<std::size_t>(order[static_cast<std::size_t>(slot)])];
                if (cfg.augment_enabled) {
                    Rng aug_rng(derive_seed(aug_root, static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(slot)));
                    img::Image sample = img::augment(data.image_copy(pos), cfg.augment, aug_rng);
                    std::memcpy(b.images.data() + static_cast<std::size_t>(j) * px, sample.pix.data(),
                                px * sizeof(float));
                } else {
                    std::memcpy(b.images.data() + static_cast<std::size_t>(j) * px, data.image_ptr(pos),
                                px * sizeof(float));
                }
                b.labels[static_cast<std::size_t>(j)] = view.labels[static_cast<std::size_t>(pos)];
            }
            if (cfg.mixup_alpha > 0.0) {
                Rng mix_rng(derive_seed(mix_root, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(step)));
                nn::mixup_batch(b, cfg.mixup_alpha, mix_rng);
            }

            nn::forward(params, b, nn::Mode::train, cache);
            nn::update_bn_running_stats(params, cache);
            nn::LossResult<float> loss = nn::batch_loss(cache.logits, b, params.num_classes, cfg.label_smoothing);
            if (!std::isfinite(loss.loss)) throw NumericError("train: non-finite loss");
            epoch_loss += loss.loss;

            for (auto& layer : grads.conv) {
                std::fill(layer.kernels.begin(), layer.kernels.end(), 0.0f);
                std::fill(layer.bias.begin(), layer.bias.end(), 0.0f);
            }
            std::fill(grads.embed_w.begin(), grads.embed_w.end(), 0.0f);
            std::fill(grads.embed_b.begin(), grads.embed_b.end(), 0.0f);
            std::fill(grads.bn_gamma.begin(), grads.bn_gamma.end(), 0.0f);
            std::fill(grads.bn_beta.begin(), grads.bn_beta.end(), 0.0f);
            std::fill(grads.classifier_w.begin(), grads.classifier_w.end(), 0.0f);
            nn::backward(params, cache, loss.dlogits, grads);

            double lr = nn::lr_at(state.step, schedule, steps_per_epoch);
            nn::sgd_update(params, grads, state, lr, schedule);
            ++state.step;
        }
        result.epoch_loss.push_back(epoch_loss / steps_per_epoch);
    }
    result.params = std::move(params);
    return result;
}

}  // namespace

TrainResult train_model(const synth::Dataset& data, const TrainView& view, const TrainerConfig& cfg,
                        std::uint64_t seed) {
    Rng init_rng(derive_seed(seed, kInitKey));
    nn::ModelParams<float> params = nn::init_model<float>(cfg.arch, data.num_classes, init_rng);
    return run_training(std::move(params), data, view, cfg, cfg.optim, seed);
}

TrainResult finetune_full(const nn::ModelParams<float>& start, const synth::Dataset& data,
                          const TrainView& view, const TrainerConfig& cfg, int epochs,
                          std::uint64_t seed) {
    if (epochs == 0) return TrainResult{start, {}};
    nn::OptimConfig schedule = nn::scaled_for_epochs(cfg.optim, epochs);
    return run_training(start, data, view, cfg, schedule, seed);
}

std::vector<double> score_dataset(const nn::ModelParams<float>& params, const synth::Dataset& data) {
    return nn::predict_proba(params, data.images.data(), data.n, data.h, data.w);
}

ensemble::EvalReport evaluate_model(const nn::ModelParams<float>& params, const synth::Dataset& val,
                                    const std::vector<int>& train_class_counts) {
    std::vector<double> probs = score_dataset(params, val);
    std::vector<int> labels(val.labels.begin(), val.labels.end());
    return ensemble::eval_report(probs, val.n, val.num_classes, labels, train_class_counts);
}

std::vector<float> extract_features(const nn::ModelParams<float>& params, const synth::Dataset& data) {
    const int d = params.d_emb();
    std::vector<float> feats(static_cast<std::size_t>(data.n) * d);
    const std::size_t px = static_cast<std::size_t>(data.h) * data.w;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < data.n; ++i) {
        nn::Batch<float> one;
        one.b = 1;
        one.h = data.h;
        one.w = data.w;
        one.images.assign(data.images.begin() + static_cast<std::ptrdiff_t>(i * px),
                          data.images.begin() + static_cast<std::ptrdiff_t>((i + 1) * px));
        nn::ForwardCache<float> cache;
        nn::forward(params, one, nn::Mode::eval, cache);
        std::copy(cache.bn_out.begin(), cache.bn_out.end(),
                  feats.begin() + static_cast<std::ptrdiff_t>(i) * d);
    }
    return feats;
}

}  // namespace tailforge::train
