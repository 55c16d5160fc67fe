#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tailforge/imageops.hpp"
#include "tailforge/rng.hpp"

namespace tailforge::synth {

enum class Profile { exponential, step };
enum class NoiseMode { symmetric, asymmetric };

std::string to_string(Profile p);
std::string to_string(NoiseMode m);
Profile profile_from_string(const std::string& s);
NoiseMode noise_mode_from_string(const std::string& s);

struct DatasetSpec {
    int num_classes = 50;
    int max_count = 200;
    double imbalance_ratio = 100.0;
    Profile profile = Profile::exponential;
    int base_resolution = 24;
    double noise_rate = 0.2;
    NoiseMode noise_mode = NoiseMode::symmetric;
    std::uint64_t seed = 0;
    int val_per_class = 10;
};

// Rendering knobs for the procedural glyphs. The defaults define the stock
// benchmark difficulty; tests override individual fields (e.g. zero noise).
struct GlyphStyle {
    int strokes = 5;  // base strokes; the pattern is mirror-symmetrized to 2x
    float min_width = 0.08f;
    float max_width = 0.15f;
    float min_amp = 0.75f;
    float max_amp = 1.00f;
    float jitter_linear = 0.04f;     // affine matrix perturbation, uniform +-
    float jitter_translate = 0.06f;  // translation, uniform +-
    float scale_jitter = 1.15f;      // apparent scale log-uniform in [1/s, s]
    float noise_std = 0.03f;         // additive per-pixel noise
};

struct Dataset {
    int n = 0;
    int h = 0;
    int w = 0;
    int num_classes = 0;
    std::vector<float> images;            // n * h * w, row-major
    std::vector<std::uint32_t> labels;     // given (possibly noisy)
    std::vector<std::uint32_t> true_labels;
    std::vector<std::uint8_t> flip_mask;   // 1 where labels[i] != true_labels[i]
    std::vector<std::uint32_t> class_counts;  // derived from labels
    DatasetSpec spec;
    std::uint64_t stream_seed = 0;  // per-sample substream key (train: seed, val: seed+1)

    const float* image_ptr(int i) const { return images.data() + static_cast<std::size_t>(i) * h * w; }
    img::Image image_copy(int i) const;
};

struct GeneratedData {
    Dataset train;
    Dataset val;
};

// Long-tailed per-class sample counts. Exponential: round(n_max * ratio^(-c/(C-1)))
// with floor 1; step: n_max for the first half of the classes, n_max/ratio after.
std::vector<int> gen_class_counts(int num_classes, int n_max, double ratio, Profile profile);

// One glyph image. The stroke arrangement is keyed by class_id alone; the rng
// supplies the per-sample affine jitter (drawn first) and additive pixel noise,
// so re-rendering with the same starting rng state at another resolution keeps
// the sample's geometry.
img::Image gen_glyph(int class_id, int resolution, Rng& rng, const GlyphStyle& style = {});

// Independent per-sample flips. Symmetric draws a uniform wrong class;
// asymmetric maps c to (c+1) mod C.
void inject_label_noise(const std::vector<std::uint32_t>& true_labels, int num_classes,
                        double rate, NoiseMode mode, Rng& rng,
                        std::vector<std::uint32_t>& labels, std::vector<std::uint8_t>& flip_mask);

// Full dataset plus the disjoint balanced noise-free validation split
// (keyed by seed + 1, val_per_class samples per class).
GeneratedData gen_dataset(const DatasetSpec& spec);

// Re-renders every sample of a generated dataset at another resolution using
// the same per-sample substreams (same glyph, same jitter, fresh pixel grid).
std::vector<float> render_at(const Dataset& d, int resolution);

void validate_dataset(const Dataset& d);

void write_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace tailforge::synth
