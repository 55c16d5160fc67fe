#include "tailforge/tta.hpp"

#include <cmath>

namespace tailforge::img {

CropMode crop_mode_from_string(const std::string& s) {
    if (s == "center_only") return CropMode::center_only;
    if (s == "ten_crop") return CropMode::ten_crop;
    throw ConfigError("unknown crop mode: " + s);
}

std::string to_string(CropMode m) {
    return m == CropMode::center_only ? "center_only" : "ten_crop";
}

AverageSpace average_space_from_string(const std::string& s) {
    if (s == "probability") return AverageSpace::probability;
    if (s == "logit") return AverageSpace::logit;
    throw ConfigError("unknown average space: " + s);
}

std::string to_string(AverageSpace a) {
    return a == AverageSpace::probability ? "probability" : "logit";
}

std::vector<double> fixres_tta_predict(const nn::ModelParams<float>& params, const Image& input,
                                       const TtaConfig& cfg) {
    cfg.validate();
    if (cfg.train_res == 0)
        throw ConfigError("tta: train_res unresolved (0); callers must substitute a concrete resolution");
    const int c = params.num_classes;
    Image resized = resize_bilinear(input, cfg.train_res, cfg.train_res);
    int enlarged_dim = static_cast<int>(std::lround(cfg.train_res * cfg.enlarge_factor));
    Image enlarged = resize_bilinear(resized, enlarged_dim, enlarged_dim);

    std::vector<Image> crops;
    if (cfg.crops == CropMode::ten_crop) {
        auto ten = ten_crop(enlarged, cfg.train_res);
        crops.assign(ten.begin(), ten.end());
    } else {
        int off = (enlarged_dim - cfg.train_res) / 2;
        crops.push_back(crop(enlarged, off, off, cfg.train_res));
    }

    // Fixed-order accumulation over crops keeps results bit-exact.
    std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
    std::vector<float> logits(static_cast<std::size_t>(c));
    std::vector<double> probs(static_cast<std::size_t>(c));
    for (const Image& patch : crops) {
        nn::eval_logits(params, patch.pix.data(), patch.h, patch.w, logits.data());
        if (cfg.average_space == AverageSpace::probability) {
            nn::softmax_logits(logits.data(), c, probs.data());
            for (int i = 0; i < c; ++i) acc[static_cast<std::size_t>(i)] += probs[static_cast<std::size_t>(i)];
        } else {
            for (int i = 0; i < c; ++i) acc[static_cast<std::size_t>(i)] += static_cast<double>(logits[static_cast<std::size_t>(i)]);
        }
    }
    double inv_n = 1.0 / static_cast<double>(crops.size());
    for (double& v : acc) v *= inv_n;

    if (cfg.average_space == AverageSpace::logit) {
        // Averaged logits back through a double softmax.
        double mx = acc[0];
        for (double v : acc) mx = std::max(mx, v);
        double denom = 0.0;
        for (double& v : acc) {
            v = std::exp(v - mx);
            denom += v;
        }
        for (double& v : acc) v /= denom;
        return acc;
    }
    double total = 0.0;
    for (double v : acc) total += v;
    for (double& v : acc) v /= total;
    return acc;
}

std::vector<double> fixres_tta_predict_all(const nn::ModelParams<float>& params, const float* images,
                                           int n, int h, int w, const TtaConfig& cfg) {
    cfg.validate();
    const int c = params.num_classes;
    std::vector<double> out(static_cast<std::size_t>(n) * c);
    const std::size_t px = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        Image img(h, w);
        std::copy(images + static_cast<std::size_t>(i) * px, images + static_cast<std::size_t>(i + 1) * px,
                  img.pix.begin());
        std::vector<double> probs = fixres_tta_predict(params, img, cfg);
        std::copy(probs.begin(), probs.end(), out.begin() + static_cast<std::ptrdiff_t>(i) * c);
    }
    return out;
}

}  // namespace tailforge::img
