#include "tailforge/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tailforge/util.hpp"

namespace tailforge::ensemble {

using nlohmann::json;

int argmax_class(const double* probs, int num_classes) {
    int best = 0;
    for (int c = 1; c < num_classes; ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return best;
}

PredictionRecord truncate_topk(const double* probs, int num_classes, int k, int sample_id) {
    if (k < 1) throw ConfigError("truncate_topk: k must be >= 1");
    std::vector<int> order(static_cast<std::size_t>(num_classes));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });
    PredictionRecord rec;
    rec.sample_id = sample_id;
    int take = std::min(k, num_classes);
    for (int i = 0; i < take; ++i) {
        int c = order[static_cast<std::size_t>(i)];
        if (probs[c] <= 0.0) break;  // zero entries carry no information
        rec.top.emplace_back(c, probs[c]);
    }
    return rec;
}

std::vector<double> ensemble_average(const std::vector<PredictionRecord>& records, int num_classes) {
    if (records.empty()) throw ConfigError("ensemble_average: need at least one record");
    for (const PredictionRecord& r : records) {
        if (r.sample_id != records.front().sample_id) {
            throw ConfigError("ensemble_average: records disagree on sample_id");
        }
    }
    std::vector<double> avg(static_cast<std::size_t>(num_classes), 0.0);
    for (const PredictionRecord& r : records) {
        for (const auto& [c, p] : r.top) {
            if (c < 0 || c >= num_classes) throw ConfigError("ensemble_average: class out of range");
            avg[static_cast<std::size_t>(c)] += p;
        }
    }
    double inv_m = 1.0 / static_cast<double>(records.size());
    double total = 0.0;
    for (double& v : avg) {
        v *= inv_m;
        total += v;
    }
    if (total <= 0.0) throw NumericError("ensemble_average: zero total probability mass");
    for (double& v : avg) v /= total;
    return avg;
}

double mean_class_error_rate(const std::vector<int>& predictions, const std::vector<int>& labels,
                             int num_classes) {
    if (labels.empty()) throw ConfigError("mean_class_error_rate: empty input");
    if (predictions.size() != labels.size()) {
        throw ConfigError("mean_class_error_rate: predictions/labels length mismatch");
    }
    std::vector<long> count(static_cast<std::size_t>(num_classes), 0);
    std::vector<long> correct(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i];
        if (y < 0 || y >= num_classes) throw ConfigError("mean_class_error_rate: label out of range");
        ++count[static_cast<std::size_t>(y)];
        if (predictions[i] == y) ++correct[static_cast<std::size_t>(y)];
    }
    double sum_acc = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (count[static_cast<std::size_t>(c)] == 0) continue;  // absent classes excluded
        sum_acc += static_cast<double>(correct[static_cast<std::size_t>(c)]) /
                   static_cast<double>(count[static_cast<std::size_t>(c)]);
        ++present;
    }
    if (present == 0) throw ConfigError("mean_class_error_rate: no class present in labels");
    return 1.0 - sum_acc / present;
}

std::vector<int> class_splits(const std::vector<int>& class_counts) {
    int c = static_cast<int>(class_counts.size());
    if (c < 1) throw ConfigError("class_splits: empty class counts");
    std::vector<int> rank(static_cast<std::size_t>(c));
    std::iota(rank.begin(), rank.end(), 0);
    std::sort(rank.begin(), rank.end(), [&](int a, int b) {
        if (class_counts[static_cast<std::size_t>(a)] != class_counts[static_cast<std::size_t>(b)]) {
            return class_counts[static_cast<std::size_t>(a)] > class_counts[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    // Nominal tercile sizes head >= medium >= tail, then count ties straddling
    // a boundary collapse into the headier split.
    int head = (c + 2) / 3;
    int medium = (c + 1) / 3;
    std::vector<int> split_by_rank(static_cast<std::size_t>(c));
    for (int r = 0; r < c; ++r) split_by_rank[static_cast<std::size_t>(r)] = r < head ? 0 : (r < head + medium ? 1 : 2);
    for (int r = 1; r < c; ++r) {
        int prev = rank[static_cast<std::size_t>(r - 1)];
        int cur = rank[static_cast<std::size_t>(r)];
        if (class_counts[static_cast<std::size_t>(cur)] == class_counts[static_cast<std::size_t>(prev)] &&
            split_by_rank[static_cast<std::size_t>(r)] > split_by_rank[static_cast<std::size_t>(r - 1)]) {
            split_by_rank[static_cast<std::size_t>(r)] = split_by_rank[static_cast<std::size_t>(r - 1)];
        }
    }
    std::vector<int> split(static_cast<std::size_t>(c));
    for (int r = 0; r < c; ++r) split[static_cast<std::size_t>(rank[static_cast<std::size_t>(r)])] = split_by_rank[static_cast<std::size_t>(r)];
    return split;
}

namespace {

EvalReport report_from_dense(const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels, const std::vector<int>& class_counts,
                             int num_classes) {
    std::size_t n = rows.size();
    if (n != labels.size()) throw ConfigError("eval_report: probs/labels length mismatch");
    if (static_cast<int>(class_counts.size()) != num_classes) {
        throw ConfigError("eval_report: class_counts length mismatch");
    }
    EvalReport rep;
    rep.class_split = class_splits(class_counts);
    std::vector<long> count(static_cast<std::size_t>(num_classes), 0);
    std::vector<long> correct(static_cast<std::size_t>(num_classes), 0);
    long top1 = 0;
    long top5 = 0;
    std::vector<int> order(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = rows[i].data();
        int y = labels[i];
        if (y < 0 || y >= num_classes) throw ConfigError("eval_report: label out of range");
        int pred = argmax_class(p, num_classes);
        ++count[static_cast<std::size_t>(y)];
        if (pred == y) {
            ++correct[static_cast<std::size_t>(y)];
            ++top1;
        }
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + std::min(5, num_classes), order.end(),
                          [&](int a, int b) {
                              if (p[a] != p[b]) return p[a] > p[b];
                              return a < b;
                          });
        int take = std::min(5, num_classes);
        for (int j = 0; j < take; ++j) {
            if (order[static_cast<std::size_t>(j)] == y) {
                ++top5;
                break;
            }
        }
    }
    rep.top1_accuracy = static_cast<double>(top1) / static_cast<double>(n);
    rep.top5_accuracy = static_cast<double>(top5) / static_cast<double>(n);
    rep.per_class_accuracy.assign(static_cast<std::size_t>(num_classes), 0.0);
    rep.class_present.assign(static_cast<std::size_t>(num_classes), false);
    double sum_acc = 0.0;
    int present = 0;
    std::array<double, 3> split_sum{0.0, 0.0, 0.0};
    std::array<int, 3> split_n{0, 0, 0};
    for (int c = 0; c < num_classes; ++c) {
        if (count[static_cast<std::size_t>(c)] == 0) continue;
        double acc = static_cast<double>(correct[static_cast<std::size_t>(c)]) /
                     static_cast<double>(count[static_cast<std::size_t>(c)]);
        rep.per_class_accuracy[static_cast<std::size_t>(c)] = acc;
        rep.class_present[static_cast<std::size_t>(c)] = true;
        sum_acc += acc;
        ++present;
        int s = rep.class_split[static_cast<std::size_t>(c)];
        split_sum[static_cast<std::size_t>(s)] += acc;
        ++split_n[static_cast<std::size_t>(s)];
    }
    if (present == 0) throw ConfigError("eval_report: no class present in labels");
    rep.mean_class_error_rate = 1.0 - sum_acc / present;
    for (int s = 0; s < 3; ++s) {
        rep.split_accuracy[static_cast<std::size_t>(s)] =
            split_n[static_cast<std::size_t>(s)] > 0
                ? split_sum[static_cast<std::size_t>(s)] / split_n[static_cast<std::size_t>(s)]
                : 0.0;
    }
    return rep;
}

}  // namespace

EvalReport eval_report(const std::vector<double>& probs, int n, int num_classes,
                       const std::vector<int>& labels, const std::vector<int>& class_counts) {
    if (probs.size() != static_cast<std::size_t>(n) * num_classes) {
        throw ConfigError("eval_report: probs buffer has wrong size");
    }
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rows[static_cast<std::size_t>(i)].assign(probs.begin() + static_cast<std::ptrdiff_t>(i) * num_classes,
                                                 probs.begin() + static_cast<std::ptrdiff_t>(i + 1) * num_classes);
    }
    return report_from_dense(rows, labels, class_counts, num_classes);
}

EvalReport eval_report_records(const std::vector<PredictionRecord>& records, int num_classes,
                               const std::vector<int>& labels, const std::vector<int>& class_counts) {
    std::vector<std::vector<double>> rows(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        rows[i] = ensemble_average({records[i]}, num_classes);
    }
    return report_from_dense(rows, labels, class_counts, num_classes);
}

void write_records(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
    std::string out;
    for (const PredictionRecord& r : records) {
        json line;
        line["id"] = r.sample_id;
        json top = json::array();
        for (const auto& [c, p] : r.top) top.push_back(json::array({c, p}));
        line["top"] = std::move(top);
        out += line.dump();
        out += '\n';
    }
    write_text(path, out);
}

std::vector<PredictionRecord> read_records(const std::filesystem::path& path) {
    std::string text = read_text(path);
    std::vector<PredictionRecord> records;
    std::istringstream stream(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
            PredictionRecord rec;
            rec.sample_id = obj.at("id").get<int>();
            for (const json& pair : obj.at("top")) {
                rec.top.emplace_back(pair.at(0).get<int>(), pair.at(1).get<double>());
            }
            records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw IoError(IoError::Code::validation, "bad prediction record at " + path.string() +
                                                         ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_report(const EvalReport& report, const std::vector<int>& class_counts,
                  const std::filesystem::path& json_path, const std::filesystem::path& csv_path) {
    json j;
    j["mean_class_error_rate"] = report.mean_class_error_rate;
    j["top1_accuracy"] = report.top1_accuracy;
    j["top5_accuracy"] = report.top5_accuracy;
    j["split_accuracy"] = {{"head", report.split_accuracy[0]},
                           {"medium", report.split_accuracy[1]},
                           {"tail", report.split_accuracy[2]}};
    write_text(json_path, j.dump(2) + "\n");

    static const char* kSplitNames[3] = {"head", "medium", "tail"};
    std::ostringstream csv;
    csv << "class,count,accuracy,split\n";
    for (std::size_t c = 0; c < report.per_class_accuracy.size(); ++c) {
        csv << c << ',' << class_counts[c] << ',';
        csv.precision(17);
        csv << report.per_class_accuracy[c] << ',' << kSplitNames[report.class_split[c]] << '\n';
    }
    write_text(csv_path, csv.str());
}

}  // namespace tailforge::ensemble
