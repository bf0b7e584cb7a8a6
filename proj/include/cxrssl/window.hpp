#pragma once

#include <cstdint>

#include <torch/types.h>

namespace cxrssl::backbone {

/// (B, token_count, dim) tokens laid out row-major over a grid_h x grid_w grid.
struct TokenGrid {
    torch::Tensor tokens;
    std::int64_t grid_h = 0;
    std::int64_t grid_w = 0;

    std::int64_t batch() const { return tokens.size(0); }
    std::int64_t dim() const { return tokens.size(2); }

    /// Throws ShapeError unless tokens is rank 3 with grid_h * grid_w tokens.
    void check() const;

    /// (B, dim, grid_h, grid_w) view of the tokens.
    torch::Tensor to_nchw() const;
    static TokenGrid from_nchw(const torch::Tensor& x);
};

/// Splits (B, H, W, C) into (B * nW, window * window, C) blocks, windows ordered row-major
/// per image. H and W must be multiples of `window` (ShapeError otherwise).
torch::Tensor window_partition(const torch::Tensor& x, std::int64_t window);

/// Inverse of window_partition.
torch::Tensor window_reverse(const torch::Tensor& blocks, std::int64_t window, std::int64_t height,
                             std::int64_t width);

/// Zero-pads (B, H, W, C) on the bottom/right up to the next multiple of `window`.
torch::Tensor pad_to_window(const torch::Tensor& x, std::int64_t window);

/// Window side actually used on an h x w grid: the configured side, clamped to the grid.
std::int64_t effective_window(std::int64_t window, std::int64_t grid_h, std::int64_t grid_w);

}  // namespace cxrssl::backbone
