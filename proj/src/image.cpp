#include "cxrssl/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include <torch/torch.h>

#include "cxrssl/errors.hpp"

namespace cxrssl {

namespace {

struct Tap {
    int lo;
    int hi;
    double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (int i = 0; i < out; ++i) {
        double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
        src = std::max(src, 0.0);
        int lo = static_cast<int>(std::floor(src));
        lo = std::min(lo, in - 1);
        const int hi = std::min(lo + 1, in - 1);
        taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
    }
    return taps;
}

}  // namespace

Image resize_bilinear(const Image& image, int out_h, int out_w) {
    if (image.empty() || out_h <= 0 || out_w <= 0) {
        throw ShapeError("resize_bilinear: empty image or non-positive output size");
    }
    if (out_h == image.height && out_w == image.width) {
        return image;
    }
    const auto ys = bilinear_taps(image.height, out_h);
    const auto xs = bilinear_taps(image.width, out_w);
    Image out(image.channels, out_h, out_w);
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < out_h; ++y) {
            const Tap ty = ys[static_cast<std::size_t>(y)];
            for (int x = 0; x < out_w; ++x) {
                const Tap tx = xs[static_cast<std::size_t>(x)];
                const double top = (1.0 - tx.frac) * image.at(c, ty.lo, tx.lo) + tx.frac * image.at(c, ty.lo, tx.hi);
                const double bottom = (1.0 - tx.frac) * image.at(c, ty.hi, tx.lo) + tx.frac * image.at(c, ty.hi, tx.hi);
                out.at(c, y, x) = static_cast<float>((1.0 - ty.frac) * top + ty.frac * bottom);
            }
        }
    }
    return out;
}

Image crop(const Image& image, int y, int x, int h, int w) {
    if (h <= 0 || w <= 0 || y < 0 || x < 0 || y + h > image.height || x + w > image.width) {
        throw ShapeError("crop window outside image");
    }
    Image out(image.channels, h, w);
    for (int c = 0; c < image.channels; ++c) {
        for (int r = 0; r < h; ++r) {
            const float* src = &image.pixels[static_cast<std::size_t>(c) * image.plane_size() +
                                             static_cast<std::size_t>(y + r) * static_cast<std::size_t>(image.width) +
                                             static_cast<std::size_t>(x)];
            std::copy_n(src, w, &out.at(c, r, 0));
        }
    }
    return out;
}

Image center_crop(const Image& image, int h, int w) {
    if (h > image.height || w > image.width) {
        throw ShapeError("center_crop larger than image");
    }
    return crop(image, (image.height - h) / 2, (image.width - w) / 2, h, w);
}

Image convert_channels(const Image& image, int channels) {
    if (image.channels == channels) {
        return image;
    }
    if (image.channels == 1) {
        Image out(channels, image.height, image.width);
        for (int c = 0; c < channels; ++c) {
            std::copy(image.pixels.begin(), image.pixels.end(),
                      out.pixels.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * image.plane_size()));
        }
        return out;
    }
    if (image.channels == 3 && channels == 1) {
        Image out(1, image.height, image.width);
        const std::size_t n = image.plane_size();
        for (std::size_t i = 0; i < n; ++i) {
            out.pixels[i] = kLumaR * image.pixels[i] + kLumaG * image.pixels[n + i] + kLumaB * image.pixels[2 * n + i];
        }
        return out;
    }
    throw ShapeError("cannot convert " + std::to_string(image.channels) + " channels to " + std::to_string(channels));
}

torch::Tensor to_tensor(std::span<const Image> images) {
    if (images.empty()) {
        throw ShapeError("to_tensor: no images");
    }
    const Image& first = images.front();
    auto out = torch::empty({static_cast<int64_t>(images.size()), first.channels, first.height, first.width},
                            torch::kFloat32);
    float* dst = out.data_ptr<float>();
    for (const Image& img : images) {
        if (img.channels != first.channels || img.height != first.height || img.width != first.width) {
            throw ShapeError("to_tensor: images differ in shape");
        }
        std::memcpy(dst, img.pixels.data(), img.pixels.size() * sizeof(float));
        dst += img.pixels.size();
    }
    return out;
}

}  // namespace cxrssl
