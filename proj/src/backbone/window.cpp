#include "cxrssl/window.hpp"

#include <algorithm>
#include <string>

#include <torch/torch.h>

#include "cxrssl/errors.hpp"

namespace cxrssl::backbone {

void TokenGrid::check() const {
    if (!tokens.defined() || tokens.dim() != 3) {
        throw ShapeError("TokenGrid: tokens must be rank 3 (batch, tokens, dim)");
    }
    if (grid_h <= 0 || grid_w <= 0 || tokens.size(1) != grid_h * grid_w) {
        throw ShapeError("TokenGrid: token count " + std::to_string(tokens.size(1)) + " != " +
                         std::to_string(grid_h) + "x" + std::to_string(grid_w));
    }
}

torch::Tensor TokenGrid::to_nchw() const {
    check();
    return tokens.transpose(1, 2).reshape({batch(), dim(), grid_h, grid_w});
}

TokenGrid TokenGrid::from_nchw(const torch::Tensor& x) {
    if (x.dim() != 4) {
        throw ShapeError("TokenGrid::from_nchw expects (B, C, H, W)");
    }
    return {x.flatten(2).transpose(1, 2), x.size(2), x.size(3)};
}

torch::Tensor window_partition(const torch::Tensor& x, std::int64_t window) {
    if (x.dim() != 4) {
        throw ShapeError("window_partition expects (B, H, W, C)");
    }
    const auto b = x.size(0);
    const auto h = x.size(1);
    const auto w = x.size(2);
    const auto c = x.size(3);
    if (window <= 0 || h % window != 0 || w % window != 0) {
        throw ShapeError("window " + std::to_string(window) + " does not divide grid " + std::to_string(h) + "x" +
                         std::to_string(w));
    }
    return x.reshape({b, h / window, window, w / window, window, c})
        .permute({0, 1, 3, 2, 4, 5})
        .reshape({-1, window * window, c});
}

torch::Tensor window_reverse(const torch::Tensor& blocks, std::int64_t window, std::int64_t height,
                             std::int64_t width) {
    if (blocks.dim() != 3 || blocks.size(1) != window * window || height % window != 0 || width % window != 0) {
        throw ShapeError("window_reverse: blocks do not match the window/grid geometry");
    }
    const auto per_image = (height / window) * (width / window);
    if (blocks.size(0) % per_image != 0) {
        throw ShapeError("window_reverse: block count is not a multiple of windows per image");
    }
    const auto b = blocks.size(0) / per_image;
    const auto c = blocks.size(2);
    return blocks.reshape({b, height / window, width / window, window, window, c})
        .permute({0, 1, 3, 2, 4, 5})
        .reshape({b, height, width, c});
}

torch::Tensor pad_to_window(const torch::Tensor& x, std::int64_t window) {
    if (x.dim() != 4 || window <= 0) {
        throw ShapeError("pad_to_window expects (B, H, W, C) and a positive window");
    }
    const auto pad_h = (window - x.size(1) % window) % window;
    const auto pad_w = (window - x.size(2) % window) % window;
    if (pad_h == 0 && pad_w == 0) {
        return x;
    }
    // Pad spec runs from the last dimension backwards: C, W, H.
    return torch::constant_pad_nd(x, {0, 0, 0, pad_w, 0, pad_h}, 0.0);
}

std::int64_t effective_window(std::int64_t window, std::int64_t grid_h, std::int64_t grid_w) {
    return std::min({window, grid_h, grid_w});
}

}  // namespace cxrssl::backbone
