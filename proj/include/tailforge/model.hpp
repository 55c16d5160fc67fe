#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "tailforge/errors.hpp"
#include "tailforge/kernels.hpp"
#include "tailforge/rng.hpp"

namespace tailforge::nn {

// Backbone layout: conv(3x3, stride 2) + ReLU per entry of `channels`, global
// average pooling, affine embedding, BN, bias-free linear classifier.
struct ArchConfig {
    std::vector<int> channels{8, 16};
    int d_emb = 64;
};

template <typename T>
struct ConvTensors {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<T> kernels;  // out_ch * in_ch * 3 * 3
    std::vector<T> bias;     // out_ch
};

template <typename T>
struct ModelParams {
    ArchConfig arch;
    int num_classes = 0;
    std::vector<ConvTensors<T>> conv;
    std::vector<T> embed_w;  // d_emb x d_feat
    std::vector<T> embed_b;  // d_emb
    std::vector<T> bn_gamma, bn_beta;                 // d_emb, trained
    std::vector<T> bn_running_mean, bn_running_var;   // d_emb, state
    std::vector<T> classifier_w;  // num_classes x d_emb, no bias
    T bn_eps = T(1e-5);
    T bn_momentum = T(0.1);

    int d_feat() const { return arch.channels.back(); }
    int d_emb() const { return arch.d_emb; }
};

template <typename T>
struct Gradients {
    std::vector<ConvTensors<T>> conv;
    std::vector<T> embed_w, embed_b, bn_gamma, bn_beta, classifier_w;
};

enum class Mode { train, eval };

template <typename T>
struct Batch {
    int b = 0, h = 0, w = 0;
    std::vector<T> images;   // b * h * w, single channel
    std::vector<int> labels;
    bool has_mix = false;
    std::vector<int> mix_labels;  // partner labels under mixup
    double mix_lambda = 1.0;
};

template <typename T>
struct ForwardCache {
    Mode mode = Mode::train;
    int b = 0;
    std::vector<std::vector<T>> acts;      // acts[0] = input; acts[l+1] = ReLU(conv_pre[l])
    std::vector<std::vector<T>> conv_pre;  // pre-ReLU maps per layer
    std::vector<int> dims;                 // spatial side per level (dims[0] = input)
    std::vector<T> pooled;                 // b x d_feat
    std::vector<T> embed_pre;              // b x d_emb
    std::vector<T> bn_mu, bn_var, bn_invstd;  // d_emb (train mode stats)
    std::vector<T> bn_xhat;                // b x d_emb
    std::vector<T> bn_out;                 // b x d_emb
    std::vector<T> logits;                 // b x num_classes
};

template <typename T>
ModelParams<T> init_model(const ArchConfig& arch, int num_classes, Rng& rng) {
    if (num_classes < 2) throw ConfigError("init_model: need at least 2 classes");
    if (arch.channels.empty()) throw ConfigError("init_model: empty conv stack");
    ModelParams<T> p;
    p.arch = arch;
    p.num_classes = num_classes;
    int in_ch = 1;
    for (int out_ch : arch.channels) {
        ConvTensors<T> layer;
        layer.in_ch = in_ch;
        layer.out_ch = out_ch;
        layer.kernels.resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
        layer.bias.assign(static_cast<std::size_t>(out_ch), T(0));
        T std_dev = static_cast<T>(std::sqrt(2.0 / (in_ch * 9)));
        for (T& v : layer.kernels) v = static_cast<T>(rng.normal()) * std_dev;
        p.conv.push_back(std::move(layer));
        in_ch = out_ch;
    }
    int d_feat = arch.channels.back();
    p.embed_w.resize(static_cast<std::size_t>(arch.d_emb) * d_feat);
    T embed_std = static_cast<T>(std::sqrt(2.0 / d_feat));
    for (T& v : p.embed_w) v = static_cast<T>(rng.normal()) * embed_std;
    p.embed_b.assign(static_cast<std::size_t>(arch.d_emb), T(0));
    p.bn_gamma.assign(static_cast<std::size_t>(arch.d_emb), T(1));
    p.bn_beta.assign(static_cast<std::size_t>(arch.d_emb), T(0));
    p.bn_running_mean.assign(static_cast<std::size_t>(arch.d_emb), T(0));
    p.bn_running_var.assign(static_cast<std::size_t>(arch.d_emb), T(1));
    p.classifier_w.resize(static_cast<std::size_t>(num_classes) * arch.d_emb);
    for (T& v : p.classifier_w) v = static_cast<T>(rng.normal()) * T(0.01);
    return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& in) {
    ModelParams<To> out;
    out.arch = in.arch;
    out.num_classes = in.num_classes;
    out.bn_eps = static_cast<To>(in.bn_eps);
    out.bn_momentum = static_cast<To>(in.bn_momentum);
    auto cast_vec = [](const std::vector<From>& v) {
        std::vector<To> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) r[i] = static_cast<To>(v[i]);
        return r;
    };
    for (const ConvTensors<From>& layer : in.conv) {
        ConvTensors<To> l;
        l.in_ch = layer.in_ch;
        l.out_ch = layer.out_ch;
        l.kernels = cast_vec(layer.kernels);
        l.bias = cast_vec(layer.bias);
        out.conv.push_back(std::move(l));
    }
    out.embed_w = cast_vec(in.embed_w);
    out.embed_b = cast_vec(in.embed_b);
    out.bn_gamma = cast_vec(in.bn_gamma);
    out.bn_beta = cast_vec(in.bn_beta);
    out.bn_running_mean = cast_vec(in.bn_running_mean);
    out.bn_running_var = cast_vec(in.bn_running_var);
    out.classifier_w = cast_vec(in.classifier_w);
    return out;
}

template <typename T>
Gradients<T> make_zero_grads(const ModelParams<T>& p) {
    Gradients<T> g;
    for (const ConvTensors<T>& layer : p.conv) {
        ConvTensors<T> l;
        l.in_ch = layer.in_ch;
        l.out_ch = layer.out_ch;
        l.kernels.assign(layer.kernels.size(), T(0));
        l.bias.assign(layer.bias.size(), T(0));
        g.conv.push_back(std::move(l));
    }
    g.embed_w.assign(p.embed_w.size(), T(0));
    g.embed_b.assign(p.embed_b.size(), T(0));
    g.bn_gamma.assign(p.bn_gamma.size(), T(0));
    g.bn_beta.assign(p.bn_beta.size(), T(0));
    g.classifier_w.assign(p.classifier_w.size(), T(0));
    return g;
}

// Train mode normalizes with batch statistics (stored in the cache); eval mode
// reads the running stats. Pure in `params` — callers that train must follow a
// train-mode forward with update_bn_running_stats().
template <typename T>
void forward(const ModelParams<T>& params, const Batch<T>& batch, Mode mode, ForwardCache<T>& cache) {
    const int b = batch.b;
    if (b < 1) throw ConfigError("forward: empty batch");
    if (mode == Mode::train && b < 2) {
        throw ConfigError("forward: train mode needs batch size >= 2 (batch variance undefined)");
    }
    if (batch.h < 8 || batch.w < 8) throw ConfigError("forward: spatial size must be >= 8");

    const int n_layers = static_cast<int>(params.conv.size());
    cache.mode = mode;
    cache.b = b;
    cache.acts.assign(static_cast<std::size_t>(n_layers) + 1, {});
    cache.conv_pre.assign(static_cast<std::size_t>(n_layers), {});
    cache.dims.assign(static_cast<std::size_t>(n_layers) + 1, 0);

    cache.acts[0] = batch.images;
    cache.dims[0] = batch.h;
    int dim = batch.h;
    for (int l = 0; l < n_layers; ++l) {
        const ConvTensors<T>& layer = params.conv[static_cast<std::size_t>(l)];
        int out_dim = kern::conv_out_dim(dim);
        std::size_t out_size = static_cast<std::size_t>(b) * layer.out_ch * out_dim * out_dim;
        cache.conv_pre[static_cast<std::size_t>(l)].assign(out_size, T(0));
        kern::conv2d_forward(cache.acts[static_cast<std::size_t>(l)].data(), b, layer.in_ch, dim, dim,
                             layer.kernels.data(), layer.bias.data(), layer.out_ch,
                             cache.conv_pre[static_cast<std::size_t>(l)].data());
        std::vector<T>& act = cache.acts[static_cast<std::size_t>(l) + 1];
        act.resize(out_size);
        const std::vector<T>& pre = cache.conv_pre[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < out_size; ++i) act[i] = pre[i] > T(0) ? pre[i] : T(0);
        dim = out_dim;
        cache.dims[static_cast<std::size_t>(l) + 1] = dim;
    }

    // Global average pooling.
    const int d_feat = params.d_feat();
    const int spatial = dim * dim;
    cache.pooled.assign(static_cast<std::size_t>(b) * d_feat, T(0));
    const std::vector<T>& last = cache.acts.back();
    for (int n = 0; n < b; ++n) {
        for (int c = 0; c < d_feat; ++c) {
            const T* src = last.data() + (static_cast<std::size_t>(n) * d_feat + c) * spatial;
            T acc = T(0);
            for (int i = 0; i < spatial; ++i) acc += src[i];
            cache.pooled[static_cast<std::size_t>(n) * d_feat + c] = acc / static_cast<T>(spatial);
        }
    }

    // Embedding projection (affine, no activation).
    const int d_emb = params.d_emb();
    cache.embed_pre.assign(static_cast<std::size_t>(b) * d_emb, T(0));
    for (int n = 0; n < b; ++n) {
        const T* f = cache.pooled.data() + static_cast<std::size_t>(n) * d_feat;
        T* e = cache.embed_pre.data() + static_cast<std::size_t>(n) * d_emb;
        for (int j = 0; j < d_emb; ++j) {
            const T* w = params.embed_w.data() + static_cast<std::size_t>(j) * d_feat;
            T acc = params.embed_b[static_cast<std::size_t>(j)];
            for (int k = 0; k < d_feat; ++k) acc += w[k] * f[k];
            e[static_cast<std::size_t>(j)] = acc;
        }
    }

    // BNNeck.
    cache.bn_xhat.assign(static_cast<std::size_t>(b) * d_emb, T(0));
    cache.bn_out.assign(static_cast<std::size_t>(b) * d_emb, T(0));
    if (mode == Mode::train) {
        cache.bn_mu.assign(static_cast<std::size_t>(d_emb), T(0));
        cache.bn_var.assign(static_cast<std::size_t>(d_emb), T(0));
        cache.bn_invstd.assign(static_cast<std::size_t>(d_emb), T(0));
        for (int j = 0; j < d_emb; ++j) {
            T mu = T(0);
            for (int n = 0; n < b; ++n) mu += cache.embed_pre[static_cast<std::size_t>(n) * d_emb + j];
            mu /= static_cast<T>(b);
            T var = T(0);
            for (int n = 0; n < b; ++n) {
                T dlt = cache.embed_pre[static_cast<std::size_t>(n) * d_emb + j] - mu;
                var += dlt * dlt;
            }
            var /= static_cast<T>(b);
            T invstd = T(1) / std::sqrt(var + params.bn_eps);
            cache.bn_mu[static_cast<std::size_t>(j)] = mu;
            cache.bn_var[static_cast<std::size_t>(j)] = var;
            cache.bn_invstd[static_cast<std::size_t>(j)] = invstd;
            for (int n = 0; n < b; ++n) {
                std::size_t idx = static_cast<std::size_t>(n) * d_emb + j;
                T xh = (cache.embed_pre[idx] - mu) * invstd;
                cache.bn_xhat[idx] = xh;
                cache.bn_out[idx] = params.bn_gamma[static_cast<std::size_t>(j)] * xh +
                                    params.bn_beta[static_cast<std::size_t>(j)];
            }
        }
    } else {
        for (int j = 0; j < d_emb; ++j) {
            T invstd = T(1) / std::sqrt(params.bn_running_var[static_cast<std::size_t>(j)] + params.bn_eps);
            for (int n = 0; n < b; ++n) {
                std::size_t idx = static_cast<std::size_t>(n) * d_emb + j;
                T xh = (cache.embed_pre[idx] - params.bn_running_mean[static_cast<std::size_t>(j)]) * invstd;
                cache.bn_xhat[idx] = xh;
                cache.bn_out[idx] = params.bn_gamma[static_cast<std::size_t>(j)] * xh +
                                    params.bn_beta[static_cast<std::size_t>(j)];
            }
        }
    }

    // Classifier.
    const int num_classes = params.num_classes;
    cache.logits.assign(static_cast<std::size_t>(b) * num_classes, T(0));
    for (int n = 0; n < b; ++n) {
        const T* y = cache.bn_out.data() + static_cast<std::size_t>(n) * d_emb;
        T* lg = cache.logits.data() + static_cast<std::size_t>(n) * num_classes;
        for (int i = 0; i < num_classes; ++i) {
            const T* w = params.classifier_w.data() + static_cast<std::size_t>(i) * d_emb;
            T acc = T(0);
            for (int j = 0; j < d_emb; ++j) acc += w[j] * y[j];
            lg[i] = acc;
        }
    }
}

// r <- (1 - m) * r + m * batch_stat, applied to both running mean and variance.
template <typename T>
void update_bn_running_stats(ModelParams<T>& params, const ForwardCache<T>& cache) {
    if (cache.mode != Mode::train) throw ConfigError("update_bn_running_stats: needs a train-mode cache");
    T m = params.bn_momentum;
    for (std::size_t j = 0; j < params.bn_running_mean.size(); ++j) {
        params.bn_running_mean[j] = (T(1) - m) * params.bn_running_mean[j] + m * cache.bn_mu[j];
        params.bn_running_var[j] = (T(1) - m) * params.bn_running_var[j] + m * cache.bn_var[j];
    }
}

// Single-sample eval-mode forward. Writes num_classes logits.
template <typename T>
void eval_logits(const ModelParams<T>& params, const T* image, int h, int w, T* logits) {
    Batch<T> one;
    one.b = 1;
    one.h = h;
    one.w = w;
    one.images.assign(image, image + static_cast<std::size_t>(h) * w);
    ForwardCache<T> cache;
    forward(params, one, Mode::eval, cache);
    std::copy(cache.logits.begin(), cache.logits.end(), logits);
}

// Exact reverse-mode gradients for the train-mode cache. Running BN statistics
// receive no gradient.
template <typename T>
void backward(const ModelParams<T>& params, const ForwardCache<T>& cache,
              const std::vector<T>& dlogits, Gradients<T>& grads) {
    const int b = cache.b;
    const int d_emb = params.d_emb();
    const int d_feat = params.d_feat();
    const int num_classes = params.num_classes;
    if (cache.mode != Mode::train) throw ConfigError("backward: cache must come from a train-mode forward");
    if (dlogits.size() != static_cast<std::size_t>(b) * num_classes) {
        throw ConfigError("backward: dlogits shape mismatch");
    }

    // Classifier: dW[i,j] = sum_b dlogits[b,i] * bn_out[b,j]; dy = dlogits W.
    for (int i = 0; i < num_classes; ++i) {
        T* dw = grads.classifier_w.data() + static_cast<std::size_t>(i) * d_emb;
        for (int j = 0; j < d_emb; ++j) {
            T acc = T(0);
            for (int n = 0; n < b; ++n) {
                acc += dlogits[static_cast<std::size_t>(n) * num_classes + i] *
                       cache.bn_out[static_cast<std::size_t>(n) * d_emb + j];
            }
            dw[j] = acc;
        }
    }
    std::vector<T> dy(static_cast<std::size_t>(b) * d_emb, T(0));
    for (int n = 0; n < b; ++n) {
        const T* dl = dlogits.data() + static_cast<std::size_t>(n) * num_classes;
        T* row = dy.data() + static_cast<std::size_t>(n) * d_emb;
        for (int i = 0; i < num_classes; ++i) {
            const T* w = params.classifier_w.data() + static_cast<std::size_t>(i) * d_emb;
            T g = dl[i];
            if (g == T(0)) continue;
            for (int j = 0; j < d_emb; ++j) row[j] += g * w[j];
        }
    }

    // BN backward (batch statistics).
    std::vector<T> de(static_cast<std::size_t>(b) * d_emb, T(0));
    for (int j = 0; j < d_emb; ++j) {
        T sum_dxhat = T(0);
        T sum_dxhat_xhat = T(0);
        T dgamma = T(0);
        T dbeta = T(0);
        T gamma = params.bn_gamma[static_cast<std::size_t>(j)];
        for (int n = 0; n < b; ++n) {
            std::size_t idx = static_cast<std::size_t>(n) * d_emb + j;
            T g = dy[idx];
            T xh = cache.bn_xhat[idx];
            dgamma += g * xh;
            dbeta += g;
            T dxh = g * gamma;
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh;
        }
        grads.bn_gamma[static_cast<std::size_t>(j)] = dgamma;
        grads.bn_beta[static_cast<std::size_t>(j)] = dbeta;
        T invstd = cache.bn_invstd[static_cast<std::size_t>(j)];
        T inv_b = T(1) / static_cast<T>(b);
        for (int n = 0; n < b; ++n) {
            std::size_t idx = static_cast<std::size_t>(n) * d_emb + j;
            T dxh = dy[idx] * gamma;
            de[idx] = invstd * (dxh - inv_b * sum_dxhat - cache.bn_xhat[idx] * inv_b * sum_dxhat_xhat);
        }
    }

    // Embedding.
    for (int j = 0; j < d_emb; ++j) {
        T dbias = T(0);
        T* dw = grads.embed_w.data() + static_cast<std::size_t>(j) * d_feat;
        for (int k = 0; k < d_feat; ++k) {
            T acc = T(0);
            for (int n = 0; n < b; ++n) {
                acc += de[static_cast<std::size_t>(n) * d_emb + j] *
                       cache.pooled[static_cast<std::size_t>(n) * d_feat + k];
            }
            dw[k] = acc;
        }
        for (int n = 0; n < b; ++n) dbias += de[static_cast<std::size_t>(n) * d_emb + j];
        grads.embed_b[static_cast<std::size_t>(j)] = dbias;
    }
    std::vector<T> dpooled(static_cast<std::size_t>(b) * d_feat, T(0));
    for (int n = 0; n < b; ++n) {
        const T* drow = de.data() + static_cast<std::size_t>(n) * d_emb;
        T* prow = dpooled.data() + static_cast<std::size_t>(n) * d_feat;
        for (int j = 0; j < d_emb; ++j) {
            T g = drow[j];
            if (g == T(0)) continue;
            const T* w = params.embed_w.data() + static_cast<std::size_t>(j) * d_feat;
            for (int k = 0; k < d_feat; ++k) prow[k] += g * w[k];
        }
    }

    // GAP spread + conv stack, walked backwards.
    const int n_layers = static_cast<int>(params.conv.size());
    int last_dim = cache.dims[static_cast<std::size_t>(n_layers)];
    int spatial = last_dim * last_dim;
    std::vector<T> dact(static_cast<std::size_t>(b) * d_feat * spatial, T(0));
    T inv_spatial = T(1) / static_cast<T>(spatial);
    for (int n = 0; n < b; ++n) {
        for (int c = 0; c < d_feat; ++c) {
            T g = dpooled[static_cast<std::size_t>(n) * d_feat + c] * inv_spatial;
            T* dst = dact.data() + (static_cast<std::size_t>(n) * d_feat + c) * spatial;
            for (int i = 0; i < spatial; ++i) dst[i] = g;
        }
    }

    for (int l = n_layers - 1; l >= 0; --l) {
        const ConvTensors<T>& layer = params.conv[static_cast<std::size_t>(l)];
        const std::vector<T>& pre = cache.conv_pre[static_cast<std::size_t>(l)];
        std::vector<T> dpre(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) dpre[i] = pre[i] > T(0) ? dact[i] : T(0);

        int in_dim = cache.dims[static_cast<std::size_t>(l)];
        kern::conv2d_backward_params(cache.acts[static_cast<std::size_t>(l)].data(), b, layer.in_ch,
                                     in_dim, in_dim, dpre.data(), layer.out_ch,
                                     grads.conv[static_cast<std::size_t>(l)].kernels.data(),
                                     grads.conv[static_cast<std::size_t>(l)].bias.data());
        if (l > 0) {
            dact.assign(static_cast<std::size_t>(b) * layer.in_ch * in_dim * in_dim, T(0));
            kern::conv2d_backward_input(dpre.data(), b, layer.out_ch, in_dim, in_dim,
                                        layer.kernels.data(), layer.in_ch, dact.data());
        }
    }
}

template <typename T>
struct LossResult {
    double loss = 0.0;
    std::vector<T> dlogits;
};

// Label-smoothed softmax cross entropy, mean over the batch, max-subtracted.
template <typename T>
LossResult<T> softmax_cross_entropy_ls(const std::vector<T>& logits, int b, int num_classes,
                                       const int* labels, double epsilon) {
    if (epsilon < 0.0 || epsilon >= 1.0) throw ConfigError("label smoothing must be in [0,1)");
    LossResult<T> out;
    out.dlogits.assign(static_cast<std::size_t>(b) * num_classes, T(0));
    double total = 0.0;
    double off = epsilon / num_classes;
    for (int n = 0; n < b; ++n) {
        const T* row = logits.data() + static_cast<std::size_t>(n) * num_classes;
        int label = labels[n];
        if (label < 0 || label >= num_classes) throw ConfigError("loss: label out of range");
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < num_classes; ++c) {
            double v = static_cast<double>(row[c]);
            if (!std::isfinite(v)) throw NumericError("loss: non-finite logit");
            mx = std::max(mx, v);
        }
        double denom = 0.0;
        for (int c = 0; c < num_classes; ++c) denom += std::exp(static_cast<double>(row[c]) - mx);
        double log_denom = std::log(denom);
        double sample_loss = 0.0;
        double sum_logp = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            double logp = static_cast<double>(row[c]) - mx - log_denom;
            sum_logp += logp;
            double p = std::exp(logp);
            double target = off + (c == label ? 1.0 - epsilon : 0.0);
            out.dlogits[static_cast<std::size_t>(n) * num_classes + c] =
                static_cast<T>((p - target) / b);
            if (c == label) sample_loss -= (1.0 - epsilon) * logp;
        }
        sample_loss -= off * sum_logp;
        total += sample_loss;
    }
    out.loss = total / b;
    return out;
}

// Applies the mixup loss contract when the batch carries mix metadata:
// loss = lambda * CE(labels) + (1 - lambda) * CE(partner labels).
template <typename T>
LossResult<T> batch_loss(const std::vector<T>& logits, const Batch<T>& batch, int num_classes,
                         double epsilon) {
    LossResult<T> a = softmax_cross_entropy_ls(logits, batch.b, num_classes, batch.labels.data(), epsilon);
    if (!batch.has_mix) return a;
    LossResult<T> m = softmax_cross_entropy_ls(logits, batch.b, num_classes, batch.mix_labels.data(), epsilon);
    double lam = batch.mix_lambda;
    LossResult<T> out;
    out.loss = lam * a.loss + (1.0 - lam) * m.loss;
    out.dlogits.resize(a.dlogits.size());
    for (std::size_t i = 0; i < a.dlogits.size(); ++i) {
        out.dlogits[i] = static_cast<T>(lam) * a.dlogits[i] + static_cast<T>(1.0 - lam) * m.dlogits[i];
    }
    return out;
}

// Draws lambda ~ Beta(alpha, alpha) once, pairs each sample with a random
// permutation partner, and blends the images in place.
template <typename T>
void mixup_batch(Batch<T>& batch, double alpha, Rng& rng) {
    if (alpha <= 0.0) throw ConfigError("mixup: alpha must be > 0");
    double lam = rng.beta_symmetric(alpha);
    std::vector<int> perm(static_cast<std::size_t>(batch.b));
    for (int i = 0; i < batch.b; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);

    std::size_t px = static_cast<std::size_t>(batch.h) * batch.w;
    std::vector<T> mixed(batch.images.size());
    for (int n = 0; n < batch.b; ++n) {
        const T* own = batch.images.data() + static_cast<std::size_t>(n) * px;
        const T* other = batch.images.data() + static_cast<std::size_t>(perm[static_cast<std::size_t>(n)]) * px;
        T* dst = mixed.data() + static_cast<std::size_t>(n) * px;
        for (std::size_t i = 0; i < px; ++i) {
            dst[i] = static_cast<T>(lam) * own[i] + static_cast<T>(1.0 - lam) * other[i];
        }
    }
    batch.images = std::move(mixed);
    batch.mix_labels.resize(static_cast<std::size_t>(batch.b));
    for (int n = 0; n < batch.b; ++n) {
        batch.mix_labels[static_cast<std::size_t>(n)] = batch.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(n)])];
    }
    batch.mix_lambda = lam;
    batch.has_mix = true;
}

template <typename T>
void softmax_row(T* row, int n) {
    T mx = row[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) denom += std::exp(static_cast<double>(row[i] - mx));
    for (int i = 0; i < n; ++i) {
        row[i] = static_cast<T>(std::exp(static_cast<double>(row[i] - mx)) / denom);
    }
}

// Double-precision softmax of a float logit row (row sums to 1 within 1e-12).
inline void softmax_logits(const float* logits, int n, double* out) {
    double mx = logits[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(static_cast<double>(logits[i]) - mx);
        denom += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= denom;
}

// Batched eval-mode scoring: per-sample forward + row softmax. Parallel over
// samples with disjoint writes; serial_ref is the reference twin.
std::vector<double> predict_proba(const ModelParams<float>& params, const float* images,
                                  int n, int h, int w);
namespace serial_ref {
std::vector<double> predict_proba(const ModelParams<float>& params, const float* images,
                                  int n, int h, int w);
}

// Checkpoint directory: manifest.json + one raw f32 file per tensor.
void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& dir);
ModelParams<float> load_checkpoint(const std::filesystem::path& dir);

}  // namespace tailforge::nn
