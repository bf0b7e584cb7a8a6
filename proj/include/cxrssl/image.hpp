#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/types.h>

namespace cxrssl {

/// Planar (CHW) float image with values nominally in [0, 1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          pixels(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    bool empty() const noexcept { return pixels.empty(); }
    std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }

    float& at(int c, int y, int x) { return pixels[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
    float at(int c, int y, int x) const { return pixels[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Bilinear resize with half-pixel centers and edge clamping (no antialiasing).
/// Resizing to the input size is the identity.
Image resize_bilinear(const Image& image, int out_h, int out_w);

/// Copies the window [y, y+h) x [x, x+w); the window must lie inside the image.
Image crop(const Image& image, int y, int x, int h, int w);

/// Centered h x w window.
Image center_crop(const Image& image, int h, int w);

/// Single-channel images are replicated, three-channel images reduced to luma when
/// one channel is requested. Other conversions throw ShapeError.
Image convert_channels(const Image& image, int channels);

/// Stacks equally sized images into a (N, C, H, W) float32 tensor.
torch::Tensor to_tensor(std::span<const Image> images);

/// ITU-R 601 luma weights used by grayscale conversion and color ops.
inline constexpr float kLumaR = 0.299f;
inline constexpr float kLumaG = 0.587f;
inline constexpr float kLumaB = 0.114f;

}  // namespace cxrssl
