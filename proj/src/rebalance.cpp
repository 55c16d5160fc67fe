#include "tailforge/rebalance.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "tailforge/util.hpp"

namespace tailforge::decouple {

namespace {

constexpr std::uint64_t kCrtInitKey = 0x6372745f696e6974ULL;
constexpr std::uint64_t kCrtEpochKey = 0x6372745f65706f63ULL;

}  // namespace

Scope scope_from_string(const std::string& s) {
    if (s == "classifier_only") return Scope::classifier_only;
    if (s == "full_network") return Scope::full_network;
    throw ConfigError("unknown finetune scope: " + s);
}

std::string to_string(Scope s) {
    return s == Scope::classifier_only ? "classifier_only" : "full_network";
}

TauSearchResult grid_search_tau(const nn::ModelParams<float>& params, const synth::Dataset& val,
                                const std::vector<double>& grid,
                                const std::vector<int>& train_class_counts) {
    if (grid.empty()) throw ConfigError("grid_search_tau: empty grid");
    TauSearchResult result;
    for (double tau : grid) {
        nn::ModelParams<float> candidate = params;
        candidate.classifier_w =
            tau_normalize(params.classifier_w, params.num_classes, params.d_emb(), tau);
        ensemble::EvalReport rep = train::evaluate_model(candidate, val, train_class_counts);
        result.curve.push_back({tau, rep.mean_class_error_rate, rep.top1_accuracy});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.curve.size(); ++i) {
        const TauPoint& cand = result.curve[i];
        const TauPoint& cur = result.curve[best];
        if (cand.mcer < cur.mcer || (cand.mcer == cur.mcer && cand.tau < cur.tau)) best = i;
    }
    result.best_tau = result.curve[best].tau;
    return result;
}

void write_tau_curve_csv(const TauSearchResult& result, const std::filesystem::path& path) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "tau,mcer,top1\n";
    for (const TauPoint& p : result.curve) {
        csv << p.tau << ',' << p.mcer << ',' << p.top1 << '\n';
    }
    write_text(path, csv.str());
}

namespace {

// Classifier-only SGD on precomputed features. The feature matrix stays fixed
// (backbone frozen, BN in eval mode), so this is a plain linear-softmax fit.
std::vector<float> train_classifier_on_features(
    const std::vector<float>& feats, int d, const std::vector<int>& positions,
    const std::vector<int>& labels_full, int num_classes, std::vector<float> w,
    const nn::OptimConfig& schedule, sampling::Scheme scheme, double label_smoothing,
    std::uint64_t seed) {
    schedule.validate();
    const int batch = schedule.batch_size;
    const int n = static_cast<int>(positions.size());
    const int steps_per_epoch = n / batch;
    if (steps_per_epoch < 1) {
        throw ConfigError("retrain_classifier: fewer samples than one batch");
    }
    std::vector<int> pos_labels(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k) {
        pos_labels[k] = labels_full[static_cast<std::size_t>(positions[k])];
    }
    std::vector<std::vector<int>> by_class;
    if (scheme == sampling::Scheme::class_balanced) {
        by_class = sampling::group_by_class(pos_labels, num_classes);
    }

    std::vector<float> velocity(w.size(), 0.0f);
    std::vector<float> logits(static_cast<std::size_t>(batch) * num_classes);
    std::vector<int> batch_labels(static_cast<std::size_t>(batch));
    std::vector<const float*> batch_feat(static_cast<std::size_t>(batch));
    int global_step = 0;

    for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(seed, kCrtEpochKey, static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = scheme == sampling::Scheme::class_balanced
                                     ? sampling::class_balanced_epoch(by_class, n, epoch_rng)
                                     : sampling::instance_balanced_epoch(n, epoch_rng);
        for (int step = 0; step < steps_per_epoch; ++step) {
            for (int j = 0; j < batch; ++j) {
                int k = order[static_cast<std::size_t>(step * batch + j)];
                int pos = positions[static_cast<std::size_t>(k)];
                batch_feat[static_cast<std::size_t>(j)] = feats.data() + static_cast<std::size_t>(pos) * d;
                batch_labels[static_cast<std::size_t>(j)] = pos_labels[static_cast<std::size_t>(k)];
            }
            for (int j = 0; j < batch; ++j) {
                const float* f = batch_feat[static_cast<std::size_t>(j)];
                for (int c = 0; c < num_classes; ++c) {
                    const float* row = w.data() + static_cast<std::size_t>(c) * d;
                    float acc = 0.0f;
                    for (int t = 0; t < d; ++t) acc += row[t] * f[t];
                    logits[static_cast<std::size_t>(j) * num_classes + c] = acc;
                }
            }
            nn::LossResult<float> loss = nn::softmax_cross_entropy_ls(logits, batch, num_classes,
                                                                      batch_labels.data(), label_smoothing);
            if (!std::isfinite(loss.loss)) throw NumericError("retrain_classifier: non-finite loss");

            double lr = nn::lr_at(global_step, schedule, steps_per_epoch);
            for (int c = 0; c < num_classes; ++c) {
                float* row = w.data() + static_cast<std::size_t>(c) * d;
                float* vel = velocity.data() + static_cast<std::size_t>(c) * d;
                for (int t = 0; t < d; ++t) {
                    float g = 0.0f;
                    for (int j = 0; j < batch; ++j) {
                        g += loss.dlogits[static_cast<std::size_t>(j) * num_classes + c] *
                             batch_feat[static_cast<std::size_t>(j)][t];
                    }
                    g += static_cast<float>(schedule.weight_decay) * row[t];
                    vel[t] = static_cast<float>(schedule.momentum) * vel[t] + g;
                    row[t] -= static_cast<float>(lr) * vel[t];
                }
            }
            ++global_step;
        }
    }
    return w;
}

}  // namespace

nn::ModelParams<float> retrain_classifier(const nn::ModelParams<float>& params,
                                          const synth::Dataset& data, const train::TrainView& view,
                                          const train::TrainerConfig& tcfg, int epochs, bool reinit,
                                          std::uint64_t seed) {
    if (epochs == 0 && !reinit) return params;
    nn::ModelParams<float> out = params;
    if (reinit) {
        Rng rng(derive_seed(seed, kCrtInitKey));
        for (float& v : out.classifier_w) v = static_cast<float>(rng.normal()) * 0.01f;
    }
    if (epochs == 0) return out;
    std::vector<float> feats = train::extract_features(params, data);
    nn::OptimConfig schedule = nn::scaled_for_epochs(tcfg.optim, epochs);
    out.classifier_w = train_classifier_on_features(
        feats, params.d_emb(), view.indices, view.labels, params.num_classes, out.classifier_w,
        schedule, sampling::Scheme::class_balanced, tcfg.label_smoothing, seed);
    return out;
}

std::vector<int> build_balanced_subset(const train::TrainView& view, const std::vector<double>& probs,
                                       int num_classes, int m) {
    if (m < 1) throw ConfigError("build_balanced_subset: m must be >= 1");
    std::vector<std::vector<int>> members(static_cast<std::size_t>(num_classes));
    for (int pos : view.indices) {
        int c = view.labels[static_cast<std::size_t>(pos)];
        members[static_cast<std::size_t>(c)].push_back(pos);
    }
    std::vector<int> subset;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<int>& bucket = members[static_cast<std::size_t>(c)];
        std::sort(bucket.begin(), bucket.end(), [&](int a, int b) {
            double pa = probs[static_cast<std::size_t>(a) * num_classes + c];
            double pb = probs[static_cast<std::size_t>(b) * num_classes + c];
            if (pa != pb) return pa > pb;
            return a < b;
        });
        int take = std::min<int>(m, static_cast<int>(bucket.size()));
        subset.insert(subset.end(), bucket.begin(), bucket.begin() + take);
    }
    return subset;
}

nn::ModelParams<float> finetune_on_subset(const nn::ModelParams<float>& params,
                                          const synth::Dataset& data, const train::TrainView& view,
                                          const std::vector<int>& subset, Scope scope,
                                          const train::TrainerConfig& tcfg, int epochs,
                                          std::uint64_t seed) {
    if (subset.empty()) throw ConfigError("finetune_on_subset: empty subset");
    if (epochs == 0) return params;
    if (scope == Scope::classifier_only) {
        std::vector<float> feats = train::extract_features(params, data);
        nn::OptimConfig schedule = nn::scaled_for_epochs(tcfg.optim, epochs);
        nn::ModelParams<float> out = params;
        out.classifier_w = train_classifier_on_features(
            feats, params.d_emb(), subset, view.labels, params.num_classes, out.classifier_w,
            schedule, sampling::Scheme::instance_balanced, tcfg.label_smoothing, seed);
        return out;
    }
    train::TrainView sub_view;
    sub_view.indices = subset;
    std::sort(sub_view.indices.begin(), sub_view.indices.end());
    sub_view.labels = view.labels;
    train::TrainerConfig sub_cfg = tcfg;
    sub_cfg.scheme = sampling::Scheme::instance_balanced;
    return train::finetune_full(params, data, sub_view, sub_cfg, epochs, seed).params;
}

}  // namespace tailforge::decouple
