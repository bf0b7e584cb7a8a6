#include <cmath>

#include <gtest/gtest.h>

#include "cxrssl/augment.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/image.hpp"
#include "cxrssl/rng.hpp"

namespace {

using namespace cxrssl;
using namespace cxrssl::augment;

Image structured_image(int c, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(c, h, w);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double base = 0.5 + 0.3 * std::sin(0.3 * x + 0.2 * y + ch);
                img.at(ch, y, x) = static_cast<float>(std::clamp(base + 0.1 * (uniform01(rng) - 0.5), 0.0, 1.0));
            }
        }
    }
    return img;
}

bool in_unit_range(const Image& img) {
    return std::all_of(img.pixels.begin(), img.pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

// ---------------------------------------------------------------------------------------------
// Crop

TEST(Crop, FullRangeOnSquareImageIsIdentity) {
    AugmentConfig cfg;
    cfg.scale_min = cfg.scale_max = 1.0;
    cfg.aspect_min = cfg.aspect_max = 1.0;
    cfg.out_size = 24;
    const auto img = structured_image(3, 24, 24, 1);
    Rng rng(5);
    CropTrace t;
    EXPECT_EQ(random_resized_crop(img, rng, cfg, &t), img);
    EXPECT_EQ(t.h, 24);
    EXPECT_EQ(t.w, 24);
}

TEST(Crop, SampledRectanglesStayInRange) {
    // Many image shapes, including ones where the sampler has to fall back.
    const AugmentConfig cfg;
    Rng sizes(17);
    for (int trial = 0; trial < 2000; ++trial) {
        const int h = static_cast<int>(uniform_int(sizes, 4, 64));
        const int w = static_cast<int>(uniform_int(sizes, 4, 64));
        const Image img(1, h, w, 0.5f);
        Rng rng(derive_seed(3, trial));
        CropTrace t;
        const auto out = random_resized_crop(img, rng, cfg, &t);
        EXPECT_EQ(out.height, cfg.out_size);
        EXPECT_EQ(out.width, cfg.out_size);
        if (t.full_fallback) continue;
        EXPECT_GE(t.area_fraction, cfg.scale_min) << h << "x" << w;
        EXPECT_LE(t.area_fraction, cfg.scale_max) << h << "x" << w;
        EXPECT_GE(t.aspect, cfg.aspect_min) << h << "x" << w;
        EXPECT_LE(t.aspect, cfg.aspect_max) << h << "x" << w;
        EXPECT_GE(t.x, 0);
        EXPECT_GE(t.y, 0);
        EXPECT_LE(t.x + t.w, w);
        EXPECT_LE(t.y + t.h, h);
        EXPECT_DOUBLE_EQ(t.area_fraction, static_cast<double>(t.h) * t.w / (static_cast<double>(h) * w));
    }
}

TEST(Crop, ExtremeAspectUsesTheCenterFallback) {
    // One attempt on a wide image: the sample often misses, the centered rectangle fits.
    AugmentConfig cfg;
    cfg.crop_attempts = 1;
    const Image img(1, 20, 60, 0.5f);
    int center = 0;
    for (int i = 0; i < 50; ++i) {
        Rng rng(i);
        CropTrace t;
        random_resized_crop(img, rng, cfg, &t);
        if (t.center_fallback && !t.full_fallback) {
            ++center;
            EXPECT_GE(t.area_fraction, cfg.scale_min);
            EXPECT_LE(t.area_fraction, cfg.scale_max);
            EXPECT_GE(t.aspect, cfg.aspect_min);
            EXPECT_LE(t.aspect, cfg.aspect_max);
        }
        EXPECT_FALSE(t.full_fallback);
    }
    EXPECT_GT(center, 0);
}

TEST(Crop, InfeasibleShapesUseTheFullImage) {
    // On 8x200 no rectangle with aspect <= 4/3 reaches 30% of the area.
    const AugmentConfig cfg;
    Rng rng(4);
    CropTrace t;
    random_resized_crop(Image(1, 8, 200, 0.5f), rng, cfg, &t);
    EXPECT_TRUE(t.center_fallback);
    EXPECT_TRUE(t.full_fallback);
}

TEST(Crop, TinyImagesAreRejectedOrFlagged) {
    const AugmentConfig cfg;
    Rng rng(1);
    EXPECT_THROW(random_resized_crop(Image(1, 1, 5), rng, cfg), ShapeError);
    CropTrace t;
    const auto out = random_resized_crop(Image(1, 2, 2, 0.25f), rng, cfg, &t);
    EXPECT_TRUE(t.full_fallback);
    EXPECT_EQ(out.height, cfg.out_size);
}

TEST(Crop, SameSeedSameRectangle) {
    const AugmentConfig cfg;
    const auto img = structured_image(1, 40, 40, 2);
    for (int i = 0; i < 20; ++i) {
        Rng a(i);
        Rng b(i);
        CropTrace ta;
        CropTrace tb;
        EXPECT_EQ(random_resized_crop(img, a, cfg, &ta), random_resized_crop(img, b, cfg, &tb));
        EXPECT_EQ(ta.x, tb.x);
        EXPECT_EQ(ta.y, tb.y);
        EXPECT_EQ(ta.h, tb.h);
        EXPECT_EQ(ta.w, tb.w);
    }
}

// ---------------------------------------------------------------------------------------------
// Color

// Independent per-pixel reimplementation of the jitter chain from the recorded factors.
void oracle_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double hi = std::max(r, std::max(g, b));
    const double lo = std::min(r, std::min(g, b));
    v = hi;
    if (hi == lo) {
        h = 0.0;
        s = 0.0;
        return;
    }
    s = (hi - lo) / hi;
    const double rc = (hi - r) / (hi - lo);
    const double gc = (hi - g) / (hi - lo);
    const double bc = (hi - b) / (hi - lo);
    if (r == hi) h = bc - gc;
    else if (g == hi) h = 2.0 + rc - bc;
    else h = 4.0 + gc - rc;
    h = std::fmod(h / 6.0 + 1.0, 1.0);
}

void oracle_rgb(double h, double s, double v, double& r, double& g, double& b) {
    if (s == 0.0) {
        r = g = b = v;
        return;
    }
    h = h - std::floor(h);
    int i = static_cast<int>(h * 6.0);
    const double f = h * 6.0 - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    i %= 6;
    const double table[6][3] = {{v, t, p}, {q, v, p}, {p, v, t}, {p, q, v}, {t, p, v}, {v, p, q}};
    r = table[i][0];
    g = table[i][1];
    b = table[i][2];
}

Image oracle_color(const Image& in, const ColorTrace& t) {
    auto clip = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    auto gray = [](double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; };
    const int n = in.height * in.width;
    std::vector<std::array<double, 3>> px(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) px[i][c] = in.pixels[c * n + i];
    }
    for (auto& p : px) {
        for (auto& v : p) v = clip(v * t.brightness);
    }
    double mean = 0.0;
    for (const auto& p : px) mean += gray(p[0], p[1], p[2]);
    mean /= n;
    for (auto& p : px) {
        for (auto& v : p) v = clip(t.contrast * v + (1.0 - t.contrast) * mean);
    }
    for (auto& p : px) {
        const double y = gray(p[0], p[1], p[2]);
        for (auto& v : p) v = clip(t.saturation * v + (1.0 - t.saturation) * y);
    }
    for (auto& p : px) {
        double h, s, v;
        oracle_hsv(p[0], p[1], p[2], h, s, v);
        oracle_rgb(h + t.hue, s, v, p[0], p[1], p[2]);
    }
    if (t.grayscale) {
        for (auto& p : px) p[0] = p[1] = p[2] = clip(gray(p[0], p[1], p[2]));
    }
    Image out(3, in.height, in.width);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) out.pixels[c * n + i] = static_cast<float>(clip(px[i][c]));
    }
    return out;
}

TEST(Color, MatchesPerPixelOracle) {
    AugmentConfig cfg;
    cfg.gray_prob = 0.3;
    const auto img = structured_image(3, 16, 16, 4);
    int gray_seen = 0;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        ColorTrace t;
        const auto got = color_distort(img, rng, cfg, &t);
        gray_seen += t.grayscale ? 1 : 0;
        EXPECT_GE(t.brightness, 0.6);
        EXPECT_LE(t.brightness, 1.4);
        EXPECT_LE(std::abs(t.hue), 0.1);
        const auto want = oracle_color(img, t);
        for (std::size_t i = 0; i < got.pixels.size(); ++i) {
            ASSERT_NEAR(got.pixels[i], want.pixels[i], 1e-6) << "seed " << seed << " pixel " << i;
        }
    }
    EXPECT_GT(gray_seen, 10);
}

TEST(Color, ZeroStrengthIsIdentity) {
    AugmentConfig cfg;
    cfg.brightness = cfg.contrast = cfg.saturation = cfg.hue = 0.0;
    cfg.gray_prob = 0.0;
    const auto img = structured_image(3, 12, 9, 5);
    Rng rng(1);
    EXPECT_EQ(color_distort(img, rng, cfg), img);
}

TEST(Color, CertainGrayscaleEqualizesChannels) {
    AugmentConfig cfg;
    cfg.gray_prob = 1.0;
    const auto img = structured_image(3, 12, 12, 6);
    Rng rng(2);
    const auto out = color_distort(img, rng, cfg);
    const auto n = out.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(out.pixels[i], out.pixels[n + i]);
        EXPECT_EQ(out.pixels[i], out.pixels[2 * n + i]);
    }
}

TEST(Color, SingleChannelSkipsChromaticOps) {
    AugmentConfig cfg;
    cfg.gray_prob = 1.0;
    const auto img = structured_image(1, 10, 10, 7);
    Rng rng(3);
    ColorTrace t;
    const auto out = color_distort(img, rng, cfg, &t);
    EXPECT_EQ(t.saturation, 1.0);
    EXPECT_EQ(t.hue, 0.0);
    EXPECT_FALSE(t.grayscale);
    EXPECT_TRUE(in_unit_range(out));
    EXPECT_THROW(color_distort(Image(2, 4, 4), rng, cfg), ShapeError);
}

TEST(Color, HsvRoundTrip) {
    Rng rng(8);
    for (int i = 0; i < 5000; ++i) {
        const double r = uniform01(rng);
        const double g = uniform01(rng);
        const double b = uniform01(rng);
        double h, s, v, r2, g2, b2;
        rgb_to_hsv(r, g, b, h, s, v);
        EXPECT_GE(h, 0.0);
        EXPECT_LT(h, 1.0);
        hsv_to_rgb(h, s, v, r2, g2, b2);
        EXPECT_NEAR(r2, r, 1e-12);
        EXPECT_NEAR(g2, g, 1e-12);
        EXPECT_NEAR(b2, b, 1e-12);
    }
}

// ---------------------------------------------------------------------------------------------
// Blur

TEST(Blur, KernelSizeRule) {
    EXPECT_EQ(blur_kernel_size(224, 0.10), 23);
    EXPECT_EQ(blur_kernel_size(32, 0.10), 3);
    EXPECT_EQ(blur_kernel_size(256, 0.10), 27);
    EXPECT_EQ(blur_kernel_size(5, 0.10), 1);
    for (int side = 2; side < 600; ++side) EXPECT_EQ(blur_kernel_size(side, 0.10) % 2, 1) << side;
}

TEST(Blur, KernelIsNormalizedSymmetricAndPeaked) {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const int size = 2 * static_cast<int>(uniform_int(rng, 0, 20)) + 1;
        const double sigma = uniform(rng, 0.1, 2.0);
        const auto k = gaussian_kernel(size, sigma);
        ASSERT_EQ(static_cast<int>(k.size()), size);
        double sum = 0.0;
        for (double v : k) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-12);
        for (int j = 0; j < size; ++j) EXPECT_EQ(k[j], k[size - 1 - j]);
        for (int j = 0; j < size / 2; ++j) EXPECT_LE(k[j], k[j + 1]);
    }
    EXPECT_THROW(gaussian_kernel(4, 1.0), ConfigError);
    EXPECT_THROW(gaussian_kernel(3, 0.0), ConfigError);
}

TEST(Blur, ConstantImageIsUnchanged) {
    const Image img(3, 20, 13, 0.375f);
    for (const double sigma : {0.1, 0.7, 2.0}) {
        const auto out = blur(img, 5, sigma);
        for (const float v : out.pixels) EXPECT_NEAR(v, 0.375f, 1e-7);
    }
}

TEST(Blur, ImpulseResponseMatchesScalarKernel) {
    Image img(1, 224, 224);
    img.at(0, 112, 112) = 1.0f;
    const auto out = blur(img, 23, 1.0);
    double norm = 0.0;
    for (int i = -11; i <= 11; ++i) norm += std::exp(-static_cast<double>(i * i) / 2.0);
    const double peak = 1.0 / (norm * norm);
    EXPECT_NEAR(out.at(0, 112, 112), peak, 1e-8);
    EXPECT_NEAR(out.at(0, 112, 113), peak * std::exp(-0.5), 1e-8);
}

TEST(Blur, ApplicationRateAndRecordedParameters) {
    AugmentConfig cfg;
    const Image img(1, 32, 32, 0.5f);
    Rng rng(10);
    int applied = 0;
    for (int i = 0; i < 10000; ++i) {
        BlurTrace t;
        gaussian_blur(img, rng, cfg, &t);
        if (t.applied) {
            ++applied;
            EXPECT_GE(t.sigma, 0.1);
            EXPECT_LE(t.sigma, 2.0);
            EXPECT_EQ(t.kernel_size, 3);
        }
    }
    EXPECT_GE(applied, 4800);
    EXPECT_LE(applied, 5200);
}

// ---------------------------------------------------------------------------------------------
// Views and config

TEST(Views, ShapesRangeAndDeterminism) {
    AugmentConfig cfg;
    cfg.out_size = 48;
    const auto img = structured_image(3, 64, 80, 11);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto pair = make_view_pair(img, s, s + 1000, cfg);
        for (const auto* v : {&pair.view1, &pair.view2}) {
            EXPECT_EQ(v->height, 48);
            EXPECT_EQ(v->width, 48);
            EXPECT_EQ(v->channels, 3);
            EXPECT_TRUE(in_unit_range(*v));
        }
        const auto again = make_view_pair(img, s, s + 1000, cfg);
        EXPECT_EQ(again.view1, pair.view1);
        EXPECT_EQ(again.view2, pair.view2);
        const auto same = make_view_pair(img, s, s, cfg);
        EXPECT_EQ(same.view1, same.view2);
    }
}

TEST(Views, FullSizeViews) {
    AugmentConfig cfg;
    cfg.out_size = 224;
    const auto pair = make_view_pair(structured_image(1, 256, 256, 12), 1, 2, cfg);
    EXPECT_EQ(pair.view1.height, 224);
    EXPECT_EQ(pair.view2.width, 224);
}

TEST(Views, DistinctSeedsGiveDistinctViews) {
    const AugmentConfig cfg;
    const auto img = structured_image(3, 40, 40, 13);
    int identical = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto pair = make_view_pair(img, derive_seed(s, 1), derive_seed(s, 2), cfg);
        identical += pair.view1 == pair.view2 ? 1 : 0;
    }
    EXPECT_EQ(identical, 0);
}

TEST(Views, TraceSerializes) {
    const auto pair = make_view_pair(structured_image(1, 32, 32, 14), 3, 4, AugmentConfig{});
    const auto j = to_json(pair.trace[0]);
    EXPECT_TRUE(j.contains("crop"));
    EXPECT_TRUE(j.contains("color"));
    EXPECT_TRUE(j.contains("blur"));
}

TEST(AugmentConfig, ValidationAndJson) {
    AugmentConfig cfg;
    EXPECT_NO_THROW(validate(cfg));
    EXPECT_EQ(cfg.scale_min, 0.3);
    EXPECT_EQ(cfg.scale_max, 0.9);
    EXPECT_EQ(cfg.aspect_min, 0.75);
    EXPECT_EQ(cfg.aspect_max, 4.0 / 3.0);
    EXPECT_EQ(cfg.blur_prob, 0.5);
    EXPECT_EQ(cfg.sigma_min, 0.1);
    EXPECT_EQ(cfg.sigma_max, 2.0);
    EXPECT_EQ(cfg.kernel_frac, 0.1);
    nlohmann::json j = cfg;
    EXPECT_EQ(j.get<AugmentConfig>(), cfg);
    j["warp"] = 1;
    EXPECT_THROW(j.get<AugmentConfig>(), ConfigError);

    auto bad = cfg;
    bad.scale_min = 0.95;
    EXPECT_THROW(validate(bad), ConfigError);
    bad = cfg;
    bad.aspect_min = 1.2;
    EXPECT_THROW(validate(bad), ConfigError);
    bad = cfg;
    bad.blur_prob = 1.5;
    EXPECT_THROW(validate(bad), ConfigError);
    bad = cfg;
    bad.sigma_min = 0.0;
    EXPECT_THROW(validate(bad), ConfigError);
    bad = cfg;
    bad.hue = 0.7;
    EXPECT_THROW(validate(bad), ConfigError);
}

}  // namespace
