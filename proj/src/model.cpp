#include "tailforge/model.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "tailforge/util.hpp"

namespace tailforge::nn {

namespace {

void score_one(const ModelParams<float>& params, const float* image, int h, int w, double* out_row) {
    std::vector<float> logits(static_cast<std::size_t>(params.num_classes));
    eval_logits(params, image, h, w, logits.data());
    softmax_logits(logits.data(), params.num_classes, out_row);
}

}  // namespace

namespace serial_ref {

std::vector<double> predict_proba(const ModelParams<float>& params, const float* images,
                                  int n, int h, int w) {
    std::vector<double> probs(static_cast<std::size_t>(n) * params.num_classes);
    std::size_t px = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        score_one(params, images + static_cast<std::size_t>(i) * px, h, w,
                  probs.data() + static_cast<std::size_t>(i) * params.num_classes);
    }
    return probs;
}

}  // namespace serial_ref

std::vector<double> predict_proba(const ModelParams<float>& params, const float* images,
                                  int n, int h, int w) {
    std::vector<double> probs(static_cast<std::size_t>(n) * params.num_classes);
    std::size_t px = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        score_one(params, images + static_cast<std::size_t>(i) * px, h, w,
                  probs.data() + static_cast<std::size_t>(i) * params.num_classes);
    }
    return probs;
}

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

struct TensorRef {
    std::string name;
    const std::vector<float>* data;
};

std::vector<TensorRef> tensor_table(const ModelParams<float>& p) {
    std::vector<TensorRef> t;
    for (std::size_t l = 0; l < p.conv.size(); ++l) {
        t.push_back({"conv" + std::to_string(l) + "_kernels", &p.conv[l].kernels});
        t.push_back({"conv" + std::to_string(l) + "_bias", &p.conv[l].bias});
    }
    t.push_back({"embed_w", &p.embed_w});
    t.push_back({"embed_b", &p.embed_b});
    t.push_back({"bn_gamma", &p.bn_gamma});
    t.push_back({"bn_beta", &p.bn_beta});
    t.push_back({"bn_running_mean", &p.bn_running_mean});
    t.push_back({"bn_running_var", &p.bn_running_var});
    t.push_back({"classifier_w", &p.classifier_w});
    return t;
}

std::vector<std::vector<float>*> mutable_tensor_table(ModelParams<float>& p) {
    std::vector<std::vector<float>*> t;
    for (std::size_t l = 0; l < p.conv.size(); ++l) {
        t.push_back(&p.conv[l].kernels);
        t.push_back(&p.conv[l].bias);
    }
    t.push_back(&p.embed_w);
    t.push_back(&p.embed_b);
    t.push_back(&p.bn_gamma);
    t.push_back(&p.bn_beta);
    t.push_back(&p.bn_running_mean);
    t.push_back(&p.bn_running_var);
    t.push_back(&p.classifier_w);
    return t;
}

}  // namespace

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["arch"]["channels"] = params.arch.channels;
    manifest["arch"]["d_emb"] = params.arch.d_emb;
    manifest["num_classes"] = params.num_classes;
    manifest["bn_eps"] = params.bn_eps;
    manifest["bn_momentum"] = params.bn_momentum;
    json tensors = json::object();
    for (const TensorRef& t : tensor_table(params)) {
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.data->data());
        std::size_t n_bytes = t.data->size() * sizeof(float);
        tensors[t.name] = {
            {"count", t.data->size()},
            {"checksum", hex64(fnv1a64(bytes, n_bytes))},
        };
        write_vector(dir / (t.name + ".f32"), *t.data);
    }
    manifest["tensors"] = tensors;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelParams<float> load_checkpoint(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
        throw IoError(IoError::Code::validation,
                      "checkpoint manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.contains("format_version") || manifest["format_version"].get<int>() != kCheckpointVersion) {
        throw IoError(IoError::Code::version_mismatch, "unsupported checkpoint format_version");
    }
    ModelParams<float> p;
    try {
        p.arch.channels = manifest.at("arch").at("channels").get<std::vector<int>>();
        p.arch.d_emb = manifest.at("arch").at("d_emb").get<int>();
        p.num_classes = manifest.at("num_classes").get<int>();
        p.bn_eps = manifest.at("bn_eps").get<float>();
        p.bn_momentum = manifest.at("bn_momentum").get<float>();
    } catch (const json::exception& e) {
        throw IoError(IoError::Code::validation, "checkpoint manifest missing field: " + std::string(e.what()));
    }
    if (p.arch.channels.empty() || p.arch.d_emb < 1 || p.num_classes < 2) {
        throw IoError(IoError::Code::validation, "checkpoint manifest has degenerate architecture");
    }

    // Size the tensors from the architecture, then demand exact matches.
    p.conv.resize(p.arch.channels.size());
    int in_ch = 1;
    for (std::size_t l = 0; l < p.conv.size(); ++l) {
        p.conv[l].in_ch = in_ch;
        p.conv[l].out_ch = p.arch.channels[l];
        p.conv[l].kernels.resize(static_cast<std::size_t>(p.conv[l].out_ch) * in_ch * 9);
        p.conv[l].bias.resize(static_cast<std::size_t>(p.conv[l].out_ch));
        in_ch = p.conv[l].out_ch;
    }
    std::size_t d_emb = static_cast<std::size_t>(p.arch.d_emb);
    std::size_t d_feat = static_cast<std::size_t>(p.arch.channels.back());
    p.embed_w.resize(d_emb * d_feat);
    p.embed_b.resize(d_emb);
    p.bn_gamma.resize(d_emb);
    p.bn_beta.resize(d_emb);
    p.bn_running_mean.resize(d_emb);
    p.bn_running_var.resize(d_emb);
    p.classifier_w.resize(static_cast<std::size_t>(p.num_classes) * d_emb);

    const json& tensors = manifest.at("tensors");
    std::vector<TensorRef> refs = tensor_table(p);
    std::vector<std::vector<float>*> slots = mutable_tensor_table(p);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const std::string& name = refs[i].name;
        if (!tensors.contains(name)) {
            throw IoError(IoError::Code::validation, "checkpoint manifest missing tensor entry: " + name);
        }
        std::size_t expect = slots[i]->size();
        std::size_t listed = tensors[name].at("count").get<std::size_t>();
        if (listed != expect) {
            throw IoError(IoError::Code::size_mismatch,
                          "checkpoint tensor " + name + " count " + std::to_string(listed) +
                              " does not match architecture (" + std::to_string(expect) + ")");
        }
        *slots[i] = read_vector<float>(dir / (name + ".f32"), expect);
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(slots[i]->data());
        std::string got = hex64(fnv1a64(bytes, expect * sizeof(float)));
        std::string want = tensors[name].at("checksum").get<std::string>();
        if (got != want) {
            throw IoError(IoError::Code::checksum_mismatch, "checkpoint tensor " + name + " checksum mismatch");
        }
    }
    return p;
}

}  // namespace tailforge::nn
