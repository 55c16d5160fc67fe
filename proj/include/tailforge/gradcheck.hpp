#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailforge/model.hpp"

namespace tailforge::nn {

// Finite-difference validation of backward() in double precision. Setups are
// rejection-sampled to stay away from ReLU kinks and degenerate batch
// statistics, so central differences are trustworthy at h = 1e-5.
struct GradcheckConfig {
    int num_classes = 5;
    std::vector<int> channels{6, 12};
    int d_emb = 16;
    int resolution = 8;
    int batch = 3;
    double step = 1e-5;
    double tolerance = 1e-5;
    int checks_per_tensor = 23;  // 9 tensors -> >= 200 scalar checks per case
    double relu_margin = 1e-3;   // min |pre-activation| at every conv output
    double bn_var_floor = 1e-2;  // min per-feature batch variance
    double grad_floor = 1e-5;    // skip indices whose analytic gradient is below this
};

struct GradcheckCase {
    ModelParams<double> params;
    Batch<double> batch;
    double label_smoothing = 0.0;
    int rejected_setups = 0;  // setups discarded before this one qualified
};

struct GradcheckCheck {
    std::string tensor;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradcheckReport {
    int draws = 0;
    int checks = 0;
    double max_rel_err = 0.0;
    GradcheckCheck worst;
    bool pass = false;
};

// Draws one qualifying setup; deterministic in (config, seed).
GradcheckCase draw_well_conditioned(const GradcheckConfig& config, std::uint64_t seed);

// Checks one setup; appends per-index results to `out`.
void gradcheck_case(const GradcheckConfig& config, const GradcheckCase& gc, std::uint64_t seed,
                    std::vector<GradcheckCheck>& out);

// Full harness: `draws` independent setups, every parameter tensor sampled.
GradcheckReport run_gradcheck(const GradcheckConfig& config, int draws, std::uint64_t seed);

}  // namespace tailforge::nn
