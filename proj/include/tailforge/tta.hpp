#pragma once

#include <string>
#include <vector>

#include "tailforge/imageops.hpp"
#include "tailforge/model.hpp"

namespace tailforge::img {

enum class CropMode { center_only, ten_crop };
enum class AverageSpace { probability, logit };

CropMode crop_mode_from_string(const std::string& s);
std::string to_string(CropMode m);
AverageSpace average_space_from_string(const std::string& s);
std::string to_string(AverageSpace a);

// FixRes test pipeline: resize to the training resolution, enlarge, crop back
// to the training resolution, average crop predictions.
struct TtaConfig {
    // 0 means "derive from context": the pipeline's operating resolution in the
    // ladder, or the dataset's native resolution for standalone tta-eval.
    int train_res = 0;
    double enlarge_factor = 1.25;  // paper's worked example 256 -> 320
    CropMode crops = CropMode::ten_crop;
    AverageSpace average_space = AverageSpace::probability;

    void validate() const {
        if (train_res != 0 && train_res < 8) throw ConfigError("tta: train_res must be >= 8");
        if (enlarge_factor < 1.0) throw ConfigError("tta: enlarge_factor must be >= 1");
    }
};

// Returns a probability vector (sums to 1 within 1e-9). With enlarge_factor=1
// and center_only the pipeline collapses to plain predict_proba exactly.
std::vector<double> fixres_tta_predict(const nn::ModelParams<float>& params, const Image& input,
                                       const TtaConfig& cfg);

// Batched TTA over a dataset image buffer; parallel across samples with
// per-sample determinism (each sample's crop averaging is fixed-order serial).
std::vector<double> fixres_tta_predict_all(const nn::ModelParams<float>& params, const float* images,
                                           int n, int h, int w, const TtaConfig& cfg);

}  // namespace tailforge::img
