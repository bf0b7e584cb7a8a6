#include "cxrssl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cxrssl/errors.hpp"

namespace cxrssl::augment {

void validate(const AugmentConfig& cfg) {
    if (cfg.out_size < 1) {
        throw ConfigError("augment.out_size must be positive");
    }
    if (!(cfg.scale_min > 0.0 && cfg.scale_min <= cfg.scale_max && cfg.scale_max <= 1.0)) {
        throw ConfigError("augment scale range must satisfy 0 < min <= max <= 1");
    }
    if (!(cfg.aspect_min > 0.0 && cfg.aspect_min <= 1.0 && 1.0 <= cfg.aspect_max)) {
        throw ConfigError("augment aspect range must satisfy 0 < min <= 1 <= max");
    }
    for (double p : {cfg.gray_prob, cfg.blur_prob}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError("augment probabilities must lie in [0, 1]");
        }
    }
    if (!(cfg.brightness >= 0.0 && cfg.contrast >= 0.0 && cfg.saturation >= 0.0)) {
        throw ConfigError("jitter strengths must be non-negative");
    }
    if (!(cfg.hue >= 0.0 && cfg.hue <= 0.5)) {
        throw ConfigError("hue strength must lie in [0, 0.5]");
    }
    if (!(cfg.sigma_min > 0.0 && cfg.sigma_min <= cfg.sigma_max)) {
        throw ConfigError("blur sigma range must be positive and ordered");
    }
    if (!(cfg.kernel_frac > 0.0 && cfg.kernel_frac <= 1.0)) {
        throw ConfigError("blur kernel_frac must lie in (0, 1]");
    }
    if (cfg.crop_attempts < 1) {
        throw ConfigError("crop_attempts must be at least 1");
    }
}

#define CXRSSL_AUG_FIELDS(X)                                                                                  \
    X(out_size) X(scale_min) X(scale_max) X(aspect_min) X(aspect_max) X(brightness) X(contrast) X(saturation) \
    X(hue) X(gray_prob) X(blur_prob) X(sigma_min) X(sigma_max) X(kernel_frac) X(crop_attempts)

void to_json(nlohmann::json& j, const AugmentConfig& cfg) {
    j = nlohmann::json::object();
#define X(f) j[#f] = cfg.f;
    CXRSSL_AUG_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, AugmentConfig& cfg) {
    for (const auto& [key, _] : j.items()) {
        bool known = false;
#define X(f) known = known || key == #f;
        CXRSSL_AUG_FIELDS(X)
#undef X
        if (!known) {
            throw ConfigError("unknown augment key '" + key + "'");
        }
    }
#define X(f) if (j.contains(#f)) j.at(#f).get_to(cfg.f);
    CXRSSL_AUG_FIELDS(X)
#undef X
}

#undef CXRSSL_AUG_FIELDS

nlohmann::json to_json(const ViewTrace& t) {
    return {
        {"crop",
         {{"x", t.crop.x}, {"y", t.crop.y}, {"h", t.crop.h}, {"w", t.crop.w},
          {"area_fraction", t.crop.area_fraction}, {"aspect", t.crop.aspect}, {"attempts", t.crop.attempts},
          {"center_fallback", t.crop.center_fallback}, {"full_fallback", t.crop.full_fallback}}},
        {"color",
         {{"brightness", t.color.brightness}, {"contrast", t.color.contrast}, {"saturation", t.color.saturation},
          {"hue", t.color.hue}, {"grayscale", t.color.grayscale}}},
        {"blur", {{"applied", t.blur.applied}, {"sigma", t.blur.sigma}, {"kernel_size", t.blur.kernel_size}}},
    };
}

// ---------------------------------------------------------------------------------------------
// Crop

namespace {

bool in_ranges(int h, int w, int height, int width, const AugmentConfig& cfg) {
    if (h < 1 || w < 1 || h > height || w > width) {
        return false;
    }
    const double area = static_cast<double>(h) * w / (static_cast<double>(height) * width);
    const double aspect = static_cast<double>(w) / h;
    return area >= cfg.scale_min && area <= cfg.scale_max && aspect >= cfg.aspect_min && aspect <= cfg.aspect_max;
}

void fill_trace(CropTrace& t, int y, int x, int h, int w, int height, int width) {
    t.y = y;
    t.x = x;
    t.h = h;
    t.w = w;
    t.area_fraction = static_cast<double>(h) * w / (static_cast<double>(height) * width);
    t.aspect = static_cast<double>(w) / h;
}

}  // namespace

Image random_resized_crop(const Image& image, Rng& rng, const AugmentConfig& cfg, CropTrace* trace) {
    if (image.height < 2 || image.width < 2) {
        throw ShapeError("random_resized_crop: image must be at least 2x2");
    }
    const int H = image.height;
    const int W = image.width;
    const double total = static_cast<double>(H) * W;
    const double log_lo = std::log(cfg.aspect_min);
    const double log_hi = std::log(cfg.aspect_max);

    CropTrace local;
    CropTrace& t = trace ? *trace : local;
    t = CropTrace{};
    for (int attempt = 1; attempt <= cfg.crop_attempts; ++attempt) {
        t.attempts = attempt;
        const double area = total * uniform(rng, cfg.scale_min, cfg.scale_max);
        const double aspect = std::exp(uniform(rng, log_lo, log_hi));
        const int w = static_cast<int>(std::lround(std::sqrt(area * aspect)));
        const int h = static_cast<int>(std::lround(std::sqrt(area / aspect)));
        if (in_ranges(h, w, H, W, cfg)) {
            const int y = static_cast<int>(uniform_int(rng, 0, H - h));
            const int x = static_cast<int>(uniform_int(rng, 0, W - w));
            fill_trace(t, y, x, h, w, H, W);
            return resize_bilinear(crop(image, y, x, h, w), cfg.out_size, cfg.out_size);
        }
    }

    // Centered rectangle with the image's aspect clamped into range and the largest allowed
    // area; shrink one side at a time until the realized rectangle is inside both ranges.
    t.center_fallback = true;
    const double aspect = std::clamp(static_cast<double>(W) / H, cfg.aspect_min, cfg.aspect_max);
    const double area = total * cfg.scale_max;
    int w = std::min(W, static_cast<int>(std::floor(std::sqrt(area * aspect))));
    int h = std::min(H, static_cast<int>(std::floor(std::sqrt(area / aspect))));
    while (h >= 1 && w >= 1 && !in_ranges(h, w, H, W, cfg)) {
        const double a = static_cast<double>(w) / h;
        const double frac = static_cast<double>(h) * w / total;
        if (a > cfg.aspect_max) {
            --w;
        } else if (a < cfg.aspect_min) {
            --h;
        } else if (frac > cfg.scale_max) {
            (w >= h ? w : h) -= 1;
        } else {
            h = 0;  // too small: no feasible rectangle on this grid
        }
    }
    if (h >= 1 && w >= 1) {
        const int y = (H - h) / 2;
        const int x = (W - w) / 2;
        fill_trace(t, y, x, h, w, H, W);
        return resize_bilinear(crop(image, y, x, h, w), cfg.out_size, cfg.out_size);
    }
    t.full_fallback = true;
    fill_trace(t, 0, 0, H, W, H, W);
    return resize_bilinear(image, cfg.out_size, cfg.out_size);
}

// ---------------------------------------------------------------------------------------------
// Color

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double delta = maxc - minc;
    v = maxc;
    s = maxc > 0.0 ? delta / maxc : 0.0;
    if (delta <= 0.0) {
        h = 0.0;
        return;
    }
    if (maxc == r) {
        h = (g - b) / delta;
    } else if (maxc == g) {
        h = 2.0 + (b - r) / delta;
    } else {
        h = 4.0 + (r - g) / delta;
    }
    h /= 6.0;
    h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h -= std::floor(h);
    const double sector = h * 6.0;
    const int i = std::min(static_cast<int>(sector), 5);
    const double f = sector - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

namespace {

double clamp01(double v) {
    return std::clamp(v, 0.0, 1.0);
}

double luma(double r, double g, double b) {
    return static_cast<double>(kLumaR) * r + static_cast<double>(kLumaG) * g + static_cast<double>(kLumaB) * b;
}

double jitter_factor(Rng& rng, double strength) {
    return strength > 0.0 ? uniform(rng, std::max(0.0, 1.0 - strength), 1.0 + strength) : 1.0;
}

}  // namespace

Image color_distort(const Image& image, Rng& rng, const AugmentConfig& cfg, ColorTrace* trace) {
    if (image.channels != 1 && image.channels != 3) {
        throw ShapeError("color_distort expects 1 or 3 channels");
    }
    ColorTrace t;
    t.brightness = jitter_factor(rng, cfg.brightness);
    t.contrast = jitter_factor(rng, cfg.contrast);
    t.saturation = jitter_factor(rng, cfg.saturation);
    t.hue = cfg.hue > 0.0 ? uniform(rng, -cfg.hue, cfg.hue) : 0.0;
    t.grayscale = cfg.gray_prob > 0.0 && bernoulli(rng, cfg.gray_prob);
    const bool rgb = image.channels == 3;
    if (!rgb) {
        t.saturation = 1.0;
        t.hue = 0.0;
        t.grayscale = false;
    }

    const std::size_t n = image.plane_size();
    const int C = image.channels;
    std::vector<double> px(image.pixels.begin(), image.pixels.end());
    auto at = [&](int c, std::size_t i) -> double& { return px[static_cast<std::size_t>(c) * n + i]; };

    if (t.brightness != 1.0) {
        for (auto& v : px) v = clamp01(v * t.brightness);
    }
    if (t.contrast != 1.0) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += rgb ? luma(at(0, i), at(1, i), at(2, i)) : at(0, i);
        }
        mean /= static_cast<double>(n);
        for (auto& v : px) v = clamp01(t.contrast * v + (1.0 - t.contrast) * mean);
    }
    if (t.saturation != 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double gray = luma(at(0, i), at(1, i), at(2, i));
            for (int c = 0; c < C; ++c) {
                at(c, i) = clamp01(t.saturation * at(c, i) + (1.0 - t.saturation) * gray);
            }
        }
    }
    if (t.hue != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            double h = 0.0, s = 0.0, v = 0.0;
            rgb_to_hsv(at(0, i), at(1, i), at(2, i), h, s, v);
            hsv_to_rgb(h + t.hue, s, v, at(0, i), at(1, i), at(2, i));
        }
    }
    if (t.grayscale) {
        for (std::size_t i = 0; i < n; ++i) {
            const double gray = clamp01(luma(at(0, i), at(1, i), at(2, i)));
            at(0, i) = at(1, i) = at(2, i) = gray;
        }
    }

    Image out(image.channels, image.height, image.width);
    for (std::size_t i = 0; i < px.size(); ++i) {
        out.pixels[i] = static_cast<float>(clamp01(px[i]));
    }
    if (trace) {
        *trace = t;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Blur

int blur_kernel_size(int side, double frac) {
    const int k = static_cast<int>(std::lround(frac * side));
    return k % 2 == 0 ? k + 1 : k;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    if (size < 1 || size % 2 == 0 || !(sigma > 0.0)) {
        throw ConfigError("gaussian_kernel: size must be odd and positive, sigma positive");
    }
    const int r = size / 2;
    std::vector<double> k(static_cast<std::size_t>(size));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

namespace {

int reflect(int i, int n) {
    if (n == 1) {
        return 0;
    }
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

Image blur(const Image& image, int kernel_size, double sigma) {
    const auto k = gaussian_kernel(kernel_size, sigma);
    const int r = kernel_size / 2;
    const int H = image.height;
    const int W = image.width;
    Image out(image.channels, H, W);
    std::vector<double> rows(image.plane_size());
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int j = -r; j <= r; ++j) {
                    acc += k[static_cast<std::size_t>(j + r)] * image.at(c, y, reflect(x + j, W));
                }
                rows[static_cast<std::size_t>(y) * W + x] = acc;
            }
        }
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int j = -r; j <= r; ++j) {
                    acc += k[static_cast<std::size_t>(j + r)] * rows[static_cast<std::size_t>(reflect(y + j, H)) * W + x];
                }
                out.at(c, y, x) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Image gaussian_blur(const Image& image, Rng& rng, const AugmentConfig& cfg, BlurTrace* trace) {
    if (image.empty()) {
        throw ShapeError("gaussian_blur: empty image");
    }
    BlurTrace t;
    t.applied = bernoulli(rng, cfg.blur_prob);
    Image out = image;
    if (t.applied) {
        t.sigma = uniform(rng, cfg.sigma_min, cfg.sigma_max);
        t.kernel_size = blur_kernel_size(std::min(image.height, image.width), cfg.kernel_frac);
        out = blur(image, t.kernel_size, t.sigma);
    }
    if (trace) {
        *trace = t;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Views

Image augment_view(const Image& image, Rng& rng, const AugmentConfig& cfg, ViewTrace* trace) {
    ViewTrace local;
    ViewTrace& t = trace ? *trace : local;
    Image v = random_resized_crop(image, rng, cfg, &t.crop);
    v = color_distort(v, rng, cfg, &t.color);
    return gaussian_blur(v, rng, cfg, &t.blur);
}

ViewPair make_view_pair(const Image& image, std::uint64_t seed1, std::uint64_t seed2, const AugmentConfig& cfg) {
    ViewPair pair;
    Rng rng1(seed1);
    Rng rng2(seed2);
    pair.view1 = augment_view(image, rng1, cfg, &pair.trace[0]);
    pair.view2 = augment_view(image, rng2, cfg, &pair.trace[1]);
    return pair;
}

ViewPair make_view_pair(const Image& image, Rng& rng, const AugmentConfig& cfg) {
    const std::uint64_t seed1 = rng();
    const std::uint64_t seed2 = rng();
    return make_view_pair(image, seed1, seed2, cfg);
}

}  // namespace cxrssl::augment
