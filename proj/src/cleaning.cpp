#include "tailforge/cleaning.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tailforge/util.hpp"

namespace tailforge::cleanse {

using nlohmann::json;

namespace {

constexpr std::uint64_t kRoundKey = 0x636c6e5f726f756eULL;

}  // namespace

Rule rule_from_string(const std::string& s) {
    if (s == "drop_mismatch_lowconf") return Rule::drop_mismatch_lowconf;
    if (s == "drop_lowlabelprob") return Rule::drop_lowlabelprob;
    throw ConfigError("unknown cleaning rule: " + s);
}

std::string to_string(Rule r) {
    return r == Rule::drop_mismatch_lowconf ? "drop_mismatch_lowconf" : "drop_lowlabelprob";
}

ThresholdMode threshold_mode_from_string(const std::string& s) {
    if (s == "absolute") return ThresholdMode::absolute;
    if (s == "quantile") return ThresholdMode::quantile;
    throw ConfigError("unknown threshold mode: " + s);
}

std::string to_string(ThresholdMode m) {
    return m == ThresholdMode::absolute ? "absolute" : "quantile";
}

std::vector<ensemble::PredictionRecord> score_training_set(const nn::ModelParams<float>& params,
                                                           const synth::Dataset& data,
                                                           const std::vector<int>& positions, int k) {
    std::vector<ensemble::PredictionRecord> records(positions.size());
    const std::size_t px = static_cast<std::size_t>(data.h) * data.w;
    const int c = params.num_classes;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < positions.size(); ++i) {
        int pos = positions[i];
        std::vector<double> probs =
            nn::serial_ref::predict_proba(params, data.images.data() + static_cast<std::size_t>(pos) * px, 1,
                                          data.h, data.w);
        records[i] = ensemble::truncate_topk(probs.data(), c, k, pos);
    }
    return records;
}

namespace {

double record_top1_prob(const ensemble::PredictionRecord& r) {
    if (r.top.empty()) throw NumericError("cleaning: empty prediction record");
    return r.top.front().second;
}

int record_top1_class(const ensemble::PredictionRecord& r) {
    if (r.top.empty()) throw NumericError("cleaning: empty prediction record");
    return r.top.front().first;
}

double record_label_prob(const ensemble::PredictionRecord& r, int label) {
    for (const auto& [c, p] : r.top) {
        if (c == label) return p;
    }
    return 0.0;  // label truncated out of the top-k: no recorded mass
}

// Lower empirical quantile of `values` at q: sorted[floor(q * m)], clamped.
double lower_quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(values.size()));
    if (idx >= values.size()) idx = values.size() - 1;
    return values[idx];
}

}  // namespace

Selection select_noisy(const std::vector<ensemble::PredictionRecord>& records,
                       const std::vector<int>& labels, const CleaningConfig& cfg) {
    cfg.validate();
    if (records.size() != labels.size()) {
        throw ConfigError("select_noisy: records/labels length mismatch");
    }
    Selection sel;
    sel.drop.assign(records.size(), 0);

    double theta = cfg.conf_threshold;
    if (cfg.threshold_mode == ThresholdMode::quantile) {
        std::vector<double> mismatched;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (record_top1_class(records[i]) == labels[i]) continue;
            mismatched.push_back(cfg.rule == Rule::drop_mismatch_lowconf
                                     ? record_top1_prob(records[i])
                                     : record_label_prob(records[i], labels[i]));
        }
        if (mismatched.empty()) {
            sel.threshold_used = 0.0;  // nothing mismatched: nothing to drop
            return sel;
        }
        theta = lower_quantile(std::move(mismatched), cfg.conf_threshold);
    }
    sel.threshold_used = theta;

    for (std::size_t i = 0; i < records.size(); ++i) {
        int top1 = record_top1_class(records[i]);
        if (top1 == labels[i]) continue;  // agreement safety
        double p1 = record_top1_prob(records[i]);
        if (cfg.relabel_enabled && p1 >= cfg.relabel_threshold) {
            sel.relabel[i] = top1;
            continue;
        }
        double relevant = cfg.rule == Rule::drop_mismatch_lowconf
                              ? p1
                              : record_label_prob(records[i], labels[i]);
        if (relevant < theta) sel.drop[i] = 1;
    }
    return sel;
}

std::vector<HistogramRow> confidence_histogram(const std::vector<ensemble::PredictionRecord>& records,
                                               const std::vector<int>& labels, int bins) {
    if (bins < 2) throw ConfigError("confidence_histogram: bins must be >= 2");
    if (records.size() != labels.size()) {
        throw ConfigError("confidence_histogram: records/labels length mismatch");
    }
    std::vector<HistogramRow> rows(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        rows[static_cast<std::size_t>(b)].bin_low = static_cast<double>(b) / bins;
        rows[static_cast<std::size_t>(b)].bin_high = static_cast<double>(b + 1) / bins;
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        double p = record_top1_prob(records[i]);
        int b = std::min(bins - 1, static_cast<int>(p * bins));
        if (record_top1_class(records[i]) == labels[i]) {
            ++rows[static_cast<std::size_t>(b)].agree;
        } else {
            ++rows[static_cast<std::size_t>(b)].disagree;
        }
    }
    return rows;
}

void write_histogram_csv(const std::vector<HistogramRow>& rows, const std::filesystem::path& path) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "bin_low,bin_high,agree,disagree\n";
    for (const HistogramRow& r : rows) {
        csv << r.bin_low << ',' << r.bin_high << ',' << r.agree << ',' << r.disagree << '\n';
    }
    write_text(path, csv.str());
}

CleanResult iterative_clean(const synth::Dataset& data, const synth::Dataset& val,
                            const train::TrainerConfig& tcfg, const CleaningConfig& ccfg,
                            std::uint64_t seed, const nn::ModelParams<float>* entering) {
    ccfg.validate();
    CleanResult result;
    result.view = train::full_view(data);
    std::vector<int> train_counts(data.class_counts.begin(), data.class_counts.end());

    nn::ModelParams<float> model;
    if (entering != nullptr) {
        model = *entering;
    } else {
        model = train::train_model(data, result.view, tcfg,
                                   derive_seed(seed, kRoundKey, 0)).params;
    }

    train::TrainerConfig round_cfg = tcfg;
    if (ccfg.retrain_epochs_per_round > 0) {
        round_cfg.optim = nn::scaled_for_epochs(tcfg.optim, ccfg.retrain_epochs_per_round);
    }

    for (int r = 1; r <= ccfg.rounds; ++r) {
        const std::vector<int>& survivors = result.view.indices;
        std::vector<ensemble::PredictionRecord> records =
            score_training_set(model, data, survivors, ccfg.topk);
        std::vector<int> aligned(survivors.size());
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            aligned[i] = result.view.labels[static_cast<std::size_t>(survivors[i])];
        }
        Selection sel = select_noisy(records, aligned, ccfg);

        // Oracle bookkeeping against the injected flip ledger.
        long dropped = 0;
        long dropped_flipped = 0;
        long flipped_surviving = 0;
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            bool flipped = data.flip_mask[static_cast<std::size_t>(survivors[i])] != 0;
            if (flipped) ++flipped_surviving;
            if (sel.drop[i]) {
                ++dropped;
                if (flipped) ++dropped_flipped;
            }
        }

        CleaningRound round;
        round.round = r;
        round.dropped = static_cast<int>(dropped);
        round.relabeled = static_cast<int>(sel.relabel.size());
        round.threshold_used = sel.threshold_used;
        round.oracle_precision =
            dropped > 0 ? static_cast<double>(dropped_flipped) / static_cast<double>(dropped) : 0.0;
        round.oracle_recall = flipped_surviving > 0
                                  ? static_cast<double>(dropped_flipped) / static_cast<double>(flipped_surviving)
                                  : 0.0;

        // Apply relabels, then drops.
        for (const auto& [rec_idx, new_label] : sel.relabel) {
            int pos = survivors[rec_idx];
            if (new_label == static_cast<int>(data.true_labels[static_cast<std::size_t>(pos)])) {
                ++round.relabeled_correct;
            }
            result.view.labels[static_cast<std::size_t>(pos)] = new_label;
        }
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(data.n), 0);
        std::vector<int> next_indices;
        next_indices.reserve(survivors.size());
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            if (sel.drop[i]) {
                mask[static_cast<std::size_t>(survivors[i])] = 1;
            } else {
                next_indices.push_back(survivors[i]);
            }
        }
        result.history.drop_masks.push_back(std::move(mask));
        result.view.indices = std::move(next_indices);
        round.kept = static_cast<int>(result.view.indices.size());

        std::vector<int> counts = train::view_class_counts(result.view, data.num_classes);
        for (int c = 0; c < data.num_classes; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) {
                throw PipelineError("cleaning round " + std::to_string(r) +
                                    " would drop every sample of class " + std::to_string(c));
            }
        }

        model = train::train_model(data, result.view, round_cfg,
                                   derive_seed(seed, kRoundKey, static_cast<std::uint64_t>(r))).params;
        round.post_retrain_val_top1 = train::evaluate_model(model, val, train_counts).top1_accuracy;
        result.history.rounds.push_back(round);
    }

    result.history.final_indices = result.view.indices;
    for (int pos = 0; pos < data.n; ++pos) {
        if (result.view.labels[static_cast<std::size_t>(pos)] !=
            static_cast<int>(data.labels[static_cast<std::size_t>(pos)])) {
            result.history.final_relabels[pos] = result.view.labels[static_cast<std::size_t>(pos)];
        }
    }
    result.model = std::move(model);
    return result;
}

void write_history(const CleaningHistory& history, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json j;
    j["rounds"] = json::array();
    for (const CleaningRound& r : history.rounds) {
        j["rounds"].push_back({{"round", r.round},
                               {"kept", r.kept},
                               {"dropped", r.dropped},
                               {"relabeled", r.relabeled},
                               {"relabeled_correct", r.relabeled_correct},
                               {"oracle_precision", r.oracle_precision},
                               {"oracle_recall", r.oracle_recall},
                               {"threshold_used", r.threshold_used},
                               {"post_retrain_val_top1", r.post_retrain_val_top1}});
    }
    j["final_indices"] = history.final_indices;
    json relabels = json::object();
    for (const auto& [pos, label] : history.final_relabels) {
        relabels[std::to_string(pos)] = label;
    }
    j["final_relabels"] = relabels;
    write_text(dir / "history.json", j.dump(2) + "\n");
    for (std::size_t r = 0; r < history.drop_masks.size(); ++r) {
        write_vector(dir / ("round_" + std::to_string(r + 1) + "_drop.u8"), history.drop_masks[r]);
    }
}

}  // namespace tailforge::cleanse
