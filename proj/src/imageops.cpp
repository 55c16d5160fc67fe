#include "tailforge/imageops.hpp"

#include <algorithm>
#include <cmath>

#include "tailforge/errors.hpp"

namespace tailforge::img {

namespace {

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

inline int clampi(int v, int lo, int hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

Image resize_bilinear(const Image& in, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: output dims must be >= 1");
    if (out_h == in.h && out_w == in.w) return in;

    Image out(out_h, out_w);
    double sy = static_cast<double>(in.h) / out_h;
    double sx = static_cast<double>(in.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = clampi(y0, 0, in.h - 1);
        int y1c = clampi(y0 + 1, 0, in.h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = clampi(x0, 0, in.w - 1);
            int x1c = clampi(x0 + 1, 0, in.w - 1);
            double top = (1.0 - wx) * in.at(y0c, x0c) + wx * in.at(y0c, x1c);
            double bot = (1.0 - wx) * in.at(y1c, x0c) + wx * in.at(y1c, x1c);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

Image crop(const Image& in, int top, int left, int size) {
    if (size < 0 || top < 0 || left < 0 || top + size > in.h || left + size > in.w) {
        throw ConfigError("crop: window out of bounds");
    }
    Image out(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            out.at(y, x) = in.at(top + y, left + x);
        }
    }
    return out;
}

Image hflip(const Image& in) {
    Image out(in.h, in.w);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            out.at(y, x) = in.at(y, in.w - 1 - x);
        }
    }
    return out;
}

Image vflip(const Image& in) {
    Image out(in.h, in.w);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            out.at(y, x) = in.at(in.h - 1 - y, x);
        }
    }
    return out;
}

Image augment(const Image& in, const AugmentConfig& cfg, Rng& rng) {
    Image out = in;

    if (cfg.pad_then_crop > 0) {
        int p = cfg.pad_then_crop;
        Image padded(in.h + 2 * p, in.w + 2 * p, 0.0f);
        for (int y = 0; y < in.h; ++y) {
            for (int x = 0; x < in.w; ++x) {
                padded.at(y + p, x + p) = in.at(y, x);
            }
        }
        int top = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(2 * p + 1)));
        int left = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(2 * p + 1)));
        out = crop(padded, top, left, in.h);
    }

    if (cfg.hflip_prob > 0.0f && rng.uniform() < cfg.hflip_prob) out = hflip(out);
    if (cfg.vflip_prob > 0.0f && rng.uniform() < cfg.vflip_prob) out = vflip(out);

    if (cfg.brightness_delta > 0.0f) {
        float shift = static_cast<float>(rng.uniform(-cfg.brightness_delta, cfg.brightness_delta));
        for (float& v : out.pix) v += shift;
    }

    if (cfg.contrast_range > 0.0f) {
        float scale = static_cast<float>(rng.uniform(1.0 - cfg.contrast_range, 1.0 + cfg.contrast_range));
        double mean = 0.0;
        for (float v : out.pix) mean += v;
        mean /= static_cast<double>(out.pix.size());
        float m = static_cast<float>(mean);
        for (float& v : out.pix) v = m + scale * (v - m);
    }

    for (int hole = 0; hole < cfg.dropout_holes; ++hole) {
        if (cfg.dropout_size <= 0) break;
        int s = std::min(cfg.dropout_size, std::min(out.h, out.w));
        int top = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(out.h - s + 1)));
        int left = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(out.w - s + 1)));
        for (int y = top; y < top + s; ++y) {
            for (int x = left; x < left + s; ++x) {
                out.at(y, x) = 0.0f;
            }
        }
    }

    for (float& v : out.pix) v = clamp01(v);
    return out;
}

std::array<Image, 10> ten_crop(const Image& in, int size) {
    if (size > in.h || size > in.w) throw ConfigError("ten_crop: crop size exceeds image");
    int cy = (in.h - size) / 2;
    int cx = (in.w - size) / 2;
    std::array<Image, 10> out;
    out[0] = crop(in, 0, 0, size);                          // top-left
    out[1] = crop(in, 0, in.w - size, size);                // top-right
    out[2] = crop(in, in.h - size, 0, size);                // bottom-left
    out[3] = crop(in, in.h - size, in.w - size, size);      // bottom-right
    out[4] = crop(in, cy, cx, size);                        // center
    for (int i = 0; i < 5; ++i) out[5 + i] = hflip(out[i]);
    return out;
}

}  // namespace tailforge::img
