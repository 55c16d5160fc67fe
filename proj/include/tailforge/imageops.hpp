#pragma once

#include <array>
#include <vector>

#include "tailforge/rng.hpp"

namespace tailforge::img {

// Single-channel float image, row-major, values nominally in [0,1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<float> pix;

    Image() = default;
    Image(int h_, int w_, float fill = 0.0f) : h(h_), w(w_), pix(static_cast<std::size_t>(h_) * w_, fill) {}

    float& at(int y, int x) { return pix[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return pix[static_cast<std::size_t>(y) * w + x]; }
};

// Defaults are mild: the desk-scale net underfits, so heavy augmentation
// mostly slows fitting. Horizontal flips are label-preserving for the
// synthetic glyphs (mirror-symmetric class patterns); vertical flips are not
// and default off.
struct AugmentConfig {
    int pad_then_crop = 1;           // zero padding, then random crop back
    float hflip_prob = 0.5f;
    float vflip_prob = 0.0f;
    float brightness_delta = 0.05f;  // additive, uniform in +-delta
    float contrast_range = 0.10f;    // multiplicative about the mean, uniform in 1 +- range
    int dropout_holes = 0;
    int dropout_size = 3;
};

// Half-pixel-center bilinear resampling with edge clamping:
// source coordinate s = (d + 0.5) * (in / out) - 0.5 per axis.
Image resize_bilinear(const Image& in, int out_h, int out_w);

// Exact sub-rectangle copy; throws ConfigError if the window leaves the image.
Image crop(const Image& in, int top, int left, int size);

Image hflip(const Image& in);
Image vflip(const Image& in);

// Train-time augmentation chain: zero-pad + random crop back to the original
// size, random flips, brightness shift, contrast scale about the mean, coarse
// dropout. Output clipped to [0,1]. Draw order is fixed so a given rng state
// always produces the same output.
Image augment(const Image& in, const AugmentConfig& cfg, Rng& rng);

// Four corners + center + their horizontal flips, in that fixed order.
std::array<Image, 10> ten_crop(const Image& in, int size);

}  // namespace tailforge::img
