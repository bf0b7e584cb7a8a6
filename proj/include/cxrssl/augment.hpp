#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrssl/image.hpp"
#include "cxrssl/rng.hpp"

namespace cxrssl::augment {

/// Fixed-size two-view augmentation: random resized crop -> color distortion -> blur.
struct AugmentConfig {
    int out_size = 32;
    double scale_min = 0.3;
    double scale_max = 0.9;
    double aspect_min = 3.0 / 4.0;
    double aspect_max = 4.0 / 3.0;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.4;
    double hue = 0.1;
    double gray_prob = 0.2;
    double blur_prob = 0.5;
    double sigma_min = 0.1;
    double sigma_max = 2.0;
    double kernel_frac = 0.10;
    int crop_attempts = 10;

    friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

void validate(const AugmentConfig& cfg);
void to_json(nlohmann::json& j, const AugmentConfig& cfg);
void from_json(const nlohmann::json& j, AugmentConfig& cfg);

struct CropTrace {
    int x = 0;
    int y = 0;
    int h = 0;
    int w = 0;
    double area_fraction = 1.0;  ///< h*w / (H*W) of the realized integer crop
    double aspect = 1.0;         ///< w / h
    int attempts = 0;
    bool center_fallback = false;  ///< no sampled rectangle was feasible
    bool full_fallback = false;    ///< not even the center rectangle fits the ranges
};

/// Factors actually applied; neutral values (1, 1, 1, 0) when an op is skipped.
struct ColorTrace {
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue = 0.0;
    bool grayscale = false;
};

struct BlurTrace {
    bool applied = false;
    double sigma = 0.0;
    int kernel_size = 0;
};

struct ViewTrace {
    CropTrace crop;
    ColorTrace color;
    BlurTrace blur;
};

nlohmann::json to_json(const ViewTrace& trace);

struct ViewPair {
    Image view1;
    Image view2;
    std::array<ViewTrace, 2> trace;
};

/// Samples (area, log-aspect) uniformly, rejecting rectangles whose realized integer area
/// fraction or aspect leaves the configured ranges, up to `crop_attempts` times; then a
/// deterministic centered rectangle; then (tiny inputs) the full image with a flag.
/// Resizes the crop to out_size x out_size.
Image random_resized_crop(const Image& image, Rng& rng, const AugmentConfig& cfg, CropTrace* trace = nullptr);

/// Brightness, contrast, saturation, hue jitter in that order, then random grayscale.
/// Saturation, hue and grayscale need three channels and are skipped otherwise.
/// Output clamped to [0, 1].
Image color_distort(const Image& image, Rng& rng, const AugmentConfig& cfg, ColorTrace* trace = nullptr);

/// With probability blur_prob, blurs with sigma ~ U[sigma_min, sigma_max] and the kernel
/// size given by blur_kernel_size of the shorter side.
Image gaussian_blur(const Image& image, Rng& rng, const AugmentConfig& cfg, BlurTrace* trace = nullptr);

/// round(frac * side), bumped to the next odd integer when even.
int blur_kernel_size(int side, double frac);

/// Normalized 1-D Gaussian taps of odd length.
std::vector<double> gaussian_kernel(int size, double sigma);

/// Separable blur with reflect padding (edge pixel not repeated).
Image blur(const Image& image, int kernel_size, double sigma);

/// Single augmentation chain: crop -> color -> blur.
Image augment_view(const Image& image, Rng& rng, const AugmentConfig& cfg, ViewTrace* trace = nullptr);

/// Two independent chains seeded with `seed1` and `seed2`.
ViewPair make_view_pair(const Image& image, std::uint64_t seed1, std::uint64_t seed2, const AugmentConfig& cfg);

/// Draws the two chain seeds from `rng`.
ViewPair make_view_pair(const Image& image, Rng& rng, const AugmentConfig& cfg);

/// RGB <-> HSV on values in [0, 1]; hue is a fraction of a full turn.
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace cxrssl::augment
