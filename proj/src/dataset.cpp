#include "tailforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tailforge/errors.hpp"
#include "tailforge/util.hpp"

using nlohmann::json;

namespace tailforge::synth {

namespace {

constexpr std::uint64_t kGlyphKey = 0x676c7970686b6579ULL;  // class-pattern stream
constexpr std::uint64_t kRenderTag = 1;
constexpr std::uint64_t kLabelTag = 2;

struct Stroke {
    float x0, y0, x1, y1;
    float half_width;
    float amp;
};

// Stroke layout for one class, drawn from a stream keyed by class_id only.
// Patterns are mirror-symmetrized about the vertical axis so that horizontal
// flips are label-preserving (as for natural object photos); vertical flips
// are not.
std::vector<Stroke> class_pattern(int class_id, const GlyphStyle& style) {
    Rng rng(derive_seed(kGlyphKey, static_cast<std::uint64_t>(class_id)), 1);
    std::vector<Stroke> strokes(static_cast<std::size_t>(style.strokes));
    for (Stroke& s : strokes) {
        s.x0 = static_cast<float>(rng.uniform(0.12, 0.88));
        s.y0 = static_cast<float>(rng.uniform(0.12, 0.88));
        // Endpoint = start + direction * length, direction from raw components
        // (no trig, keeps the renderer bit-exact across libm versions).
        double dx = rng.uniform(-1.0, 1.0);
        double dy = rng.uniform(-1.0, 1.0);
        double norm = std::sqrt(dx * dx + dy * dy);
        if (norm < 1e-6) { dx = 1.0; dy = 0.0; norm = 1.0; }
        double len = rng.uniform(0.25, 0.65);
        s.x1 = static_cast<float>(std::clamp(s.x0 + dx / norm * len, 0.05, 0.95));
        s.y1 = static_cast<float>(std::clamp(s.y0 + dy / norm * len, 0.05, 0.95));
        s.half_width = static_cast<float>(rng.uniform(style.min_width, style.max_width));
        s.amp = static_cast<float>(rng.uniform(style.min_amp, style.max_amp));
    }
    std::size_t base = strokes.size();
    strokes.reserve(base * 2);
    for (std::size_t i = 0; i < base; ++i) {
        Stroke m = strokes[i];
        m.x0 = 1.0f - m.x0;
        m.x1 = 1.0f - m.x1;
        strokes.push_back(m);
    }
    return strokes;
}

// Squared distance from point to segment; plain arithmetic only.
inline double segment_dist2(double px, double py, const Stroke& s) {
    double vx = s.x1 - s.x0;
    double vy = s.y1 - s.y0;
    double wx = px - s.x0;
    double wy = py - s.y0;
    double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double dx = wx - t * vx;
    double dy = wy - t * vy;
    return dx * dx + dy * dy;
}

std::vector<int> counts_or_throw(const DatasetSpec& spec) {
    return gen_class_counts(spec.num_classes, spec.max_count, spec.imbalance_ratio, spec.profile);
}

void fill_images(Dataset& d, const GlyphStyle& style) {
    std::size_t px = static_cast<std::size_t>(d.h) * d.w;
    d.images.assign(static_cast<std::size_t>(d.n) * px, 0.0f);
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < d.n; ++i) {
        Rng rng(derive_seed(d.stream_seed, static_cast<std::uint64_t>(i)), kRenderTag);
        img::Image im = gen_glyph(static_cast<int>(d.true_labels[i]), d.h, rng, style);
        std::memcpy(d.images.data() + static_cast<std::size_t>(i) * px, im.pix.data(), px * sizeof(float));
    }
}

std::vector<std::uint32_t> count_labels(const std::vector<std::uint32_t>& labels, int num_classes) {
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::uint32_t l : labels) counts[l] += 1;
    return counts;
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::exponential ? "exponential" : "step"; }
std::string to_string(NoiseMode m) { return m == NoiseMode::symmetric ? "symmetric" : "asymmetric"; }

Profile profile_from_string(const std::string& s) {
    if (s == "exponential") return Profile::exponential;
    if (s == "step") return Profile::step;
    throw ConfigError("unknown profile: " + s);
}

NoiseMode noise_mode_from_string(const std::string& s) {
    if (s == "symmetric") return NoiseMode::symmetric;
    if (s == "asymmetric") return NoiseMode::asymmetric;
    throw ConfigError("unknown noise_mode: " + s);
}

img::Image Dataset::image_copy(int i) const {
    img::Image im(h, w);
    std::memcpy(im.pix.data(), image_ptr(i), im.pix.size() * sizeof(float));
    return im;
}

std::vector<int> gen_class_counts(int num_classes, int n_max, double ratio, Profile profile) {
    if (num_classes < 2) throw ConfigError("gen_class_counts: need at least 2 classes");
    if (n_max < 1) throw ConfigError("gen_class_counts: max_count must be >= 1");
    if (ratio < 1.0) throw ConfigError("gen_class_counts: imbalance_ratio must be >= 1");
    if (ratio > static_cast<double>(n_max)) {
        throw ConfigError("gen_class_counts: imbalance_ratio exceeds max_count (empty tail class)");
    }
    std::vector<int> counts(static_cast<std::size_t>(num_classes));
    if (profile == Profile::exponential) {
        for (int c = 0; c < num_classes; ++c) {
            double e = -static_cast<double>(c) / (num_classes - 1);
            long v = std::lround(n_max * std::pow(ratio, e));
            counts[static_cast<std::size_t>(c)] = static_cast<int>(std::max(1L, v));
        }
    } else {
        int tail = static_cast<int>(std::max(1L, std::lround(n_max / ratio)));
        int head_classes = (num_classes + 1) / 2;
        for (int c = 0; c < num_classes; ++c) {
            counts[static_cast<std::size_t>(c)] = c < head_classes ? n_max : tail;
        }
    }
    return counts;
}

img::Image gen_glyph(int class_id, int resolution, Rng& rng, const GlyphStyle& style) {
    if (resolution < 8) throw ConfigError("gen_glyph: resolution must be >= 8");
    std::vector<Stroke> strokes = class_pattern(class_id, style);

    // Jitter first (fixed draw count), pixel noise afterwards. The apparent
    // scale varies log-uniformly, mimicking products photographed at varying
    // distances; s > 1 zooms in about the center.
    double a00 = 1.0 + rng.uniform(-style.jitter_linear, style.jitter_linear);
    double a01 = rng.uniform(-style.jitter_linear, style.jitter_linear);
    double a10 = rng.uniform(-style.jitter_linear, style.jitter_linear);
    double a11 = 1.0 + rng.uniform(-style.jitter_linear, style.jitter_linear);
    double tx = rng.uniform(-style.jitter_translate, style.jitter_translate);
    double ty = rng.uniform(-style.jitter_translate, style.jitter_translate);
    double s = 1.0;
    if (style.scale_jitter > 1.0f) {
        s = std::exp(rng.uniform(-1.0, 1.0) * std::log(static_cast<double>(style.scale_jitter)));
    }
    a00 /= s;
    a01 /= s;
    a10 /= s;
    a11 /= s;

    img::Image im(resolution, resolution);
    for (int y = 0; y < resolution; ++y) {
        double v = (y + 0.5) / resolution - 0.5;
        for (int x = 0; x < resolution; ++x) {
            double u = (x + 0.5) / resolution - 0.5;
            double qx = a00 * u + a01 * v + tx + 0.5;
            double qy = a10 * u + a11 * v + ty + 0.5;
            double acc = 0.0;
            for (const Stroke& s : strokes) {
                double d2 = segment_dist2(qx, qy, s);
                double w2 = static_cast<double>(s.half_width) * s.half_width;
                if (d2 < w2) {
                    double f = 1.0 - d2 / w2;
                    acc += s.amp * f * f;
                }
            }
            double noise = style.noise_std > 0.0f ? style.noise_std * rng.normal() : 0.0;
            im.at(y, x) = static_cast<float>(std::clamp(acc + noise, 0.0, 1.0));
        }
    }
    return im;
}

void inject_label_noise(const std::vector<std::uint32_t>& true_labels, int num_classes,
                        double rate, NoiseMode mode, Rng& rng,
                        std::vector<std::uint32_t>& labels, std::vector<std::uint8_t>& flip_mask) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("inject_label_noise: rate must be in [0,1)");
    std::size_t n = true_labels.size();
    labels.assign(true_labels.begin(), true_labels.end());
    flip_mask.assign(n, 0);
    std::uint32_t c = static_cast<std::uint32_t>(num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.uniform() >= rate) continue;
        std::uint32_t t = true_labels[i];
        std::uint32_t flipped;
        if (mode == NoiseMode::symmetric) {
            std::uint32_t r = rng.uniform_int(c - 1);
            flipped = r >= t ? r + 1 : r;
        } else {
            flipped = (t + 1) % c;
        }
        labels[i] = flipped;
        flip_mask[i] = flipped != t ? 1 : 0;
    }
}

GeneratedData gen_dataset(const DatasetSpec& spec) {
    if (spec.base_resolution < 8) throw ConfigError("gen_dataset: base_resolution must be >= 8");
    if (spec.val_per_class < 1) throw ConfigError("gen_dataset: val_per_class must be >= 1");
    std::vector<int> counts = counts_or_throw(spec);
    GlyphStyle style;

    GeneratedData out;
    Dataset& train = out.train;
    train.spec = spec;
    train.stream_seed = spec.seed;
    train.num_classes = spec.num_classes;
    train.h = train.w = spec.base_resolution;
    train.n = std::accumulate(counts.begin(), counts.end(), 0);
    train.true_labels.reserve(static_cast<std::size_t>(train.n));
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int k = 0; k < counts[static_cast<std::size_t>(c)]; ++k) {
            train.true_labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    Rng label_rng(derive_seed(spec.seed, kLabelTag), kLabelTag);
    inject_label_noise(train.true_labels, spec.num_classes, spec.noise_rate, spec.noise_mode,
                       label_rng, train.labels, train.flip_mask);
    train.class_counts = count_labels(train.labels, spec.num_classes);
    fill_images(train, style);
    validate_dataset(train);

    Dataset& val = out.val;
    val.spec = spec;
    val.stream_seed = spec.seed + 1;
    val.num_classes = spec.num_classes;
    val.h = val.w = spec.base_resolution;
    val.n = spec.num_classes * spec.val_per_class;
    val.true_labels.reserve(static_cast<std::size_t>(val.n));
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int k = 0; k < spec.val_per_class; ++k) {
            val.true_labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    val.labels = val.true_labels;
    val.flip_mask.assign(static_cast<std::size_t>(val.n), 0);
    val.class_counts = count_labels(val.labels, spec.num_classes);
    fill_images(val, style);
    validate_dataset(val);

    return out;
}

std::vector<float> render_at(const Dataset& d, int resolution) {
    Dataset tmp;
    tmp.n = d.n;
    tmp.h = tmp.w = resolution;
    tmp.num_classes = d.num_classes;
    tmp.true_labels = d.true_labels;
    tmp.stream_seed = d.stream_seed;
    fill_images(tmp, GlyphStyle{});
    return std::move(tmp.images);
}

void validate_dataset(const Dataset& d) {
    std::size_t n = static_cast<std::size_t>(d.n);
    if (d.labels.size() != n || d.true_labels.size() != n || d.flip_mask.size() != n) {
        throw IoError(IoError::Code::validation, "dataset: field lengths disagree with n");
    }
    if (d.images.size() != n * static_cast<std::size_t>(d.h) * d.w) {
        throw IoError(IoError::Code::validation, "dataset: image payload length disagrees with n*h*w");
    }
    std::uint32_t c = static_cast<std::uint32_t>(d.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (d.labels[i] >= c || d.true_labels[i] >= c) {
            throw IoError(IoError::Code::validation,
                          "dataset: label out of range at sample " + std::to_string(i));
        }
        bool flipped = d.labels[i] != d.true_labels[i];
        if (flipped != (d.flip_mask[i] != 0)) {
            throw IoError(IoError::Code::validation,
                          "dataset: flip_mask inconsistent at sample " + std::to_string(i));
        }
    }
    std::uint64_t total = 0;
    for (std::uint32_t v : d.class_counts) total += v;
    if (total != n) throw IoError(IoError::Code::validation, "dataset: class_counts do not sum to n");
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    validate_dataset(d);
    std::filesystem::create_directories(dir);
    write_vector(dir / "images.f32", d.images);
    write_vector(dir / "labels.u32", d.labels);
    write_vector(dir / "true_labels.u32", d.true_labels);
    write_vector(dir / "flip_mask.u8", d.flip_mask);

    json manifest;
    manifest["format_version"] = 1;
    manifest["n"] = d.n;
    manifest["c"] = d.num_classes;
    manifest["h"] = d.h;
    manifest["w"] = d.w;
    manifest["stream_seed"] = d.stream_seed;
    manifest["spec"] = {
        {"num_classes", d.spec.num_classes},
        {"max_count", d.spec.max_count},
        {"imbalance_ratio", d.spec.imbalance_ratio},
        {"profile", to_string(d.spec.profile)},
        {"base_resolution", d.spec.base_resolution},
        {"noise_rate", d.spec.noise_rate},
        {"noise_mode", to_string(d.spec.noise_mode)},
        {"seed", d.spec.seed},
        {"val_per_class", d.spec.val_per_class},
    };
    manifest["checksums"] = {
        {"images.f32", hex64(fnv1a64(d.images.data(), d.images.size() * sizeof(float)))},
        {"labels.u32", hex64(fnv1a64(d.labels.data(), d.labels.size() * sizeof(std::uint32_t)))},
        {"true_labels.u32", hex64(fnv1a64(d.true_labels.data(), d.true_labels.size() * sizeof(std::uint32_t)))},
        {"flip_mask.u8", hex64(fnv1a64(d.flip_mask.data(), d.flip_mask.size()))},
    };
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw IoError(IoError::Code::validation, "manifest.json: " + std::string(e.what()));
    }
    if (!manifest.contains("format_version") || manifest["format_version"].get<int>() != 1) {
        throw IoError(IoError::Code::version_mismatch, "manifest.json: unsupported format_version");
    }

    Dataset d;
    try {
        d.n = manifest.at("n").get<int>();
        d.num_classes = manifest.at("c").get<int>();
        d.h = manifest.at("h").get<int>();
        d.w = manifest.at("w").get<int>();
        d.stream_seed = manifest.at("stream_seed").get<std::uint64_t>();
        const json& s = manifest.at("spec");
        d.spec.num_classes = s.at("num_classes").get<int>();
        d.spec.max_count = s.at("max_count").get<int>();
        d.spec.imbalance_ratio = s.at("imbalance_ratio").get<double>();
        d.spec.profile = profile_from_string(s.at("profile").get<std::string>());
        d.spec.base_resolution = s.at("base_resolution").get<int>();
        d.spec.noise_rate = s.at("noise_rate").get<double>();
        d.spec.noise_mode = noise_mode_from_string(s.at("noise_mode").get<std::string>());
        d.spec.seed = s.at("seed").get<std::uint64_t>();
        d.spec.val_per_class = s.at("val_per_class").get<int>();
    } catch (const json::exception& e) {
        throw IoError(IoError::Code::validation, "manifest.json: " + std::string(e.what()));
    }

    std::size_t n = static_cast<std::size_t>(d.n);
    std::size_t px = static_cast<std::size_t>(d.h) * d.w;
    d.images = read_vector<float>(dir / "images.f32", n * px);
    d.labels = read_vector<std::uint32_t>(dir / "labels.u32", n);
    d.true_labels = read_vector<std::uint32_t>(dir / "true_labels.u32", n);
    d.flip_mask = read_vector<std::uint8_t>(dir / "flip_mask.u8", n);

    const json& sums = manifest.at("checksums");
    auto check = [&](const char* name, const void* data, std::size_t len) {
        std::string expect = sums.at(name).get<std::string>();
        if (hex64(fnv1a64(data, len)) != expect) {
            throw IoError(IoError::Code::checksum_mismatch, std::string(name) + ": checksum mismatch");
        }
    };
    check("images.f32", d.images.data(), d.images.size() * sizeof(float));
    check("labels.u32", d.labels.data(), d.labels.size() * sizeof(std::uint32_t));
    check("true_labels.u32", d.true_labels.data(), d.true_labels.size() * sizeof(std::uint32_t));
    check("flip_mask.u8", d.flip_mask.data(), d.flip_mask.size());

    d.class_counts = count_labels(d.labels, d.num_classes);
    validate_dataset(d);
    return d;
}

}  // namespace tailforge::synth
