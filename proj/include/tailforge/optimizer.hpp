#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tailforge/errors.hpp"
#include "tailforge/model.hpp"

namespace tailforge::nn {

// SGD schedule: lr scaled linearly with batch size against a reference batch
// of 256, per-step linear warmup, then step decay at fixed epoch boundaries.
struct OptimConfig {
    double base_lr_per_256 = 0.01;
    int batch_size = 32;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int warmup_epochs = 2;
    std::vector<int> decay_epochs{14, 20};
    double decay_ratio = 0.1;
    int total_epochs = 24;

    void validate() const {
        if (base_lr_per_256 <= 0.0) throw ConfigError("optim: base_lr_per_256 must be > 0");
        if (batch_size < 2) throw ConfigError("optim: batch_size must be >= 2");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optim: momentum must be in [0,1)");
        if (weight_decay < 0.0) throw ConfigError("optim: weight_decay must be >= 0");
        if (warmup_epochs < 0) throw ConfigError("optim: warmup_epochs must be >= 0");
        if (decay_ratio <= 0.0 || decay_ratio > 1.0) throw ConfigError("optim: decay_ratio must be in (0,1]");
        if (total_epochs < 1) throw ConfigError("optim: total_epochs must be >= 1");
        for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
            if (decay_epochs[i] <= decay_epochs[i - 1]) {
                throw ConfigError("optim: decay_epochs must be strictly increasing");
            }
        }
    }
};

// Maps the schedule onto a shorter (or longer) run, keeping proportions:
// warmup and decay boundaries scale by epochs/total_epochs.
inline OptimConfig scaled_for_epochs(const OptimConfig& base, int epochs) {
    if (epochs < 1) throw ConfigError("optim: scaled_for_epochs needs epochs >= 1");
    OptimConfig out = base;
    double f = static_cast<double>(epochs) / base.total_epochs;
    out.total_epochs = epochs;
    out.warmup_epochs = std::min(epochs, static_cast<int>(std::lround(base.warmup_epochs * f)));
    out.decay_epochs.clear();
    for (int e : base.decay_epochs) {
        int scaled = static_cast<int>(std::lround(e * f));
        if (scaled <= out.warmup_epochs) scaled = out.warmup_epochs + 1;
        if (scaled < epochs && (out.decay_epochs.empty() || scaled > out.decay_epochs.back())) {
            out.decay_epochs.push_back(scaled);
        }
    }
    return out;
}

// Learning rate for global step `step` (0-based) with `steps_per_epoch` steps
// per epoch.
inline double lr_at(int step, const OptimConfig& config, int steps_per_epoch) {
    if (steps_per_epoch < 1) throw ConfigError("optim: steps_per_epoch must be >= 1");
    if (step < 0) throw ConfigError("optim: step must be >= 0");
    double base = config.base_lr_per_256 * config.batch_size / 256.0;
    int warm_steps = config.warmup_epochs * steps_per_epoch;
    double ramp = 1.0;
    if (step < warm_steps) ramp = static_cast<double>(step + 1) / warm_steps;
    int epoch = step / steps_per_epoch;
    double factor = 1.0;
    for (int e : config.decay_epochs) {
        if (epoch >= e) factor *= config.decay_ratio;
    }
    return base * ramp * factor;
}

template <typename T>
struct OptimState {
    Gradients<T> velocity;
    int step = 0;
    int steps_per_epoch = 1;
};

template <typename T>
OptimState<T> make_optim_state(const ModelParams<T>& params, int steps_per_epoch) {
    OptimState<T> s;
    s.velocity = make_zero_grads(params);
    s.steps_per_epoch = steps_per_epoch;
    return s;
}

namespace detail {

template <typename T>
void sgd_tensor(std::vector<T>& w, const std::vector<T>& g, std::vector<T>& v, double lr,
                double momentum, double wd, const std::string& name) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(static_cast<double>(g[i]))) {
            throw NumericError("sgd: non-finite gradient in " + name);
        }
        T step_grad = g[i] + static_cast<T>(wd) * w[i];
        v[i] = static_cast<T>(momentum) * v[i] + step_grad;
        w[i] -= static_cast<T>(lr) * v[i];
    }
}

}  // namespace detail

// Classic momentum SGD. Weight decay applies to conv kernels, the embedding
// matrix, and the classifier; biases and BN parameters are excluded.
template <typename T>
void sgd_update(ModelParams<T>& params, const Gradients<T>& grads, OptimState<T>& state,
                double lr, const OptimConfig& config) {
    double m = config.momentum;
    double wd = config.weight_decay;
    for (std::size_t l = 0; l < params.conv.size(); ++l) {
        std::string tag = "conv" + std::to_string(l);
        detail::sgd_tensor(params.conv[l].kernels, grads.conv[l].kernels, state.velocity.conv[l].kernels,
                           lr, m, wd, tag + "_kernels");
        detail::sgd_tensor(params.conv[l].bias, grads.conv[l].bias, state.velocity.conv[l].bias,
                           lr, m, 0.0, tag + "_bias");
    }
    detail::sgd_tensor(params.embed_w, grads.embed_w, state.velocity.embed_w, lr, m, wd, "embed_w");
    detail::sgd_tensor(params.embed_b, grads.embed_b, state.velocity.embed_b, lr, m, 0.0, "embed_b");
    detail::sgd_tensor(params.bn_gamma, grads.bn_gamma, state.velocity.bn_gamma, lr, m, 0.0, "bn_gamma");
    detail::sgd_tensor(params.bn_beta, grads.bn_beta, state.velocity.bn_beta, lr, m, 0.0, "bn_beta");
    detail::sgd_tensor(params.classifier_w, grads.classifier_w, state.velocity.classifier_w, lr, m, wd,
                       "classifier_w");
}

}  // namespace tailforge::nn
